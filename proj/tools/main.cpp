#include <iostream>

#include "hyperking/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hyperking::cli::run(args, std::cout, std::cerr).status;
}
