#include <iostream>

#include "ltn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ltn::cli::run(args, std::cout, std::cerr);
}
