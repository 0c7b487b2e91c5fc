#include "fl/store/function_store.h"

#include <fcntl.h>
#include <unistd.h>

#include <boost/crc.hpp>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fl/common/error.h"
#include "fl/common/id128.h"
#include "fl/protocol/codec.h"

namespace fl {

namespace fs = std::filesystem;

// CRC-64/XZ: ECMA-182 polynomial, reflected, all-ones init and xor-out.
uint64_t Crc64(std::string_view bytes) {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::string EncodeFlfn(const FunctionDescriptor& d) {
  std::string body = EncodeDescriptor(d);
  ByteWriter w;
  w.Raw("FLFN");
  w.U32(kFlfnVersion);
  w.U64(Crc64(body));
  w.Raw(body);
  return w.Take();
}

FunctionDescriptor DecodeFlfn(std::string_view bytes) {
  try {
    ByteReader r(bytes);
    if (r.Raw(4) != "FLFN") throw Error(ErrorCode::kStorageUnavailable, "bad .flfn magic");
    if (r.U32() != kFlfnVersion) throw Error(ErrorCode::kStorageUnavailable, "unsupported .flfn version");
    uint64_t crc = r.U64();
    auto body = bytes.substr(16);
    if (Crc64(body) != crc) throw Error(ErrorCode::kStorageUnavailable, ".flfn checksum mismatch");
    return DecodeDescriptor(body, std::numeric_limits<size_t>::max());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kStorageUnavailable) throw;
    throw Error(ErrorCode::kStorageUnavailable, std::string("corrupt .flfn: ") + e.what());
  }
}

PutResult InMemoryFunctionStore::Put(const FunctionDescriptor& d) {
  ValidateDescriptor(d);
  std::lock_guard lock(mu_);
  auto [it, inserted] = entries_.insert_or_assign(d.id, d);
  return inserted ? PutResult::kCreated : PutResult::kUpdated;
}

FunctionDescriptor InMemoryFunctionStore::Get(const FunctionId& id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::kNotFound, "function " + id.ToString() + " not found");
  return it->second;
}

bool InMemoryFunctionStore::Contains(const FunctionId& id) const {
  std::lock_guard lock(mu_);
  return entries_.contains(id);
}

void InMemoryFunctionStore::Delete(const FunctionId& id) {
  std::lock_guard lock(mu_);
  if (entries_.erase(id) == 0) {
    throw Error(ErrorCode::kNotFound, "function " + id.ToString() + " not found");
  }
}

std::vector<FunctionId> InMemoryFunctionStore::List() const {
  std::lock_guard lock(mu_);
  std::vector<FunctionId> out;
  out.reserve(entries_.size());
  for (const auto& [id, d] : entries_) out.push_back(id);
  return out;
}

namespace {

constexpr std::string_view kExtension = ".flfn";

[[noreturn]] void ThrowIo(const std::string& what) {
  throw Error(ErrorCode::kStorageUnavailable, what + ": " + std::strerror(errno));
}

void FsyncPath(const fs::path& path, int flags) {
  int fd = ::open(path.c_str(), flags | O_CLOEXEC);
  if (fd < 0) ThrowIo("open " + path.string());
  if (::fsync(fd) != 0) {
    ::close(fd);
    ThrowIo("fsync " + path.string());
  }
  ::close(fd);
}

void WriteFileDurably(const fs::path& target, std::string_view bytes) {
  fs::path tmp = target;
  tmp += ".tmp." + HexEncode(CorrelationId::Random().bytes.data(), 4);
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) ThrowIo("open " + tmp.string());
  const char* p = bytes.data();
  size_t left = bytes.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      ::unlink(tmp.c_str());
      ThrowIo("write " + tmp.string());
    }
    p += n;
    left -= static_cast<size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    ThrowIo("fsync " + tmp.string());
  }
  if (::rename(tmp.c_str(), target.c_str()) != 0) {
    ::unlink(tmp.c_str());
    ThrowIo("rename " + target.string());
  }
  FsyncPath(target.parent_path(), O_RDONLY | O_DIRECTORY);
}

std::string ReadWholeFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowIo("open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) ThrowIo("read " + path.string());
  return std::move(ss).str();
}

}  // namespace

FileFunctionStore::FileFunctionStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (!fs::is_directory(root_) || ::access(root_.c_str(), W_OK) != 0) {
    throw Error(ErrorCode::kStorageUnavailable,
                "store root '" + root_.string() + "' is not a writable directory");
  }
  // Leftovers of interrupted writes.
  for (const auto& module_dir : fs::directory_iterator(root_, ec)) {
    if (!module_dir.is_directory()) continue;
    for (const auto& entry : fs::directory_iterator(module_dir.path(), ec)) {
      if (entry.path().filename().string().find(".tmp.") != std::string::npos) {
        fs::remove(entry.path(), ec);
      }
    }
  }
}

fs::path FileFunctionStore::PathFor(const FunctionId& id) const {
  return root_ / id.module_name / (id.function_name + std::string(kExtension));
}

PutResult FileFunctionStore::Put(const FunctionDescriptor& d) {
  ValidateDescriptor(d);
  std::string bytes = EncodeFlfn(d);
  std::lock_guard lock(write_mu_);
  fs::path target = PathFor(d.id);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kStorageUnavailable, "mkdir " + target.parent_path().string() + ": " + ec.message());
  bool existed = fs::exists(target, ec);
  WriteFileDurably(target, bytes);
  return existed ? PutResult::kUpdated : PutResult::kCreated;
}

FunctionDescriptor FileFunctionStore::Get(const FunctionId& id) const {
  if (!id.IsValid()) throw Error(ErrorCode::kNotFound, "function " + id.ToString() + " not found");
  fs::path path = PathFor(id);
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorCode::kNotFound, "function " + id.ToString() + " not found");
  return DecodeFlfn(ReadWholeFile(path));
}

bool FileFunctionStore::Contains(const FunctionId& id) const {
  std::error_code ec;
  return id.IsValid() && fs::exists(PathFor(id), ec);
}

void FileFunctionStore::Delete(const FunctionId& id) {
  std::lock_guard lock(write_mu_);
  std::error_code ec;
  if (!id.IsValid() || !fs::remove(PathFor(id), ec)) {
    if (ec) throw Error(ErrorCode::kStorageUnavailable, "remove: " + ec.message());
    throw Error(ErrorCode::kNotFound, "function " + id.ToString() + " not found");
  }
  FsyncPath(PathFor(id).parent_path(), O_RDONLY | O_DIRECTORY);
}

std::vector<FunctionId> FileFunctionStore::List() const {
  std::vector<FunctionId> out;
  std::error_code ec;
  for (const auto& module_dir : fs::directory_iterator(root_, ec)) {
    if (!module_dir.is_directory()) continue;
    std::string module = module_dir.path().filename().string();
    if (!IsValidName(module)) continue;
    for (const auto& entry : fs::directory_iterator(module_dir.path(), ec)) {
      if (entry.path().extension() != kExtension) continue;
      std::string name = entry.path().stem().string();
      if (IsValidName(name)) out.push_back(FunctionId{module, name});
    }
  }
  return out;
}

std::unique_ptr<FunctionStore> MakeFunctionStore(const StoreConfig& config) {
  switch (config.backend) {
    case StoreConfig::Backend::kInMemory: return std::make_unique<InMemoryFunctionStore>();
    case StoreConfig::Backend::kFileBacked:
      return std::make_unique<FileFunctionStore>(config.root_path);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown store backend");
}

}  // namespace fl
