#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fl::testing {

inline std::string GuestPath(const std::string& name) { return std::string(FL_GUEST_DIR) + "/" + name + ".wasm"; }

inline std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string GuestBytes(const std::string& name) { return ReadFile(GuestPath(name)); }

}  // namespace fl::testing
