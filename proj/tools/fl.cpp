#include <iostream>

#include "fl/cli/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fl::cli::Run(args, std::cout, std::cerr);
}
