#include <iostream>
#include <string>
#include <vector>

#include "litecd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return litecd::run_cli(args, std::cout, std::cerr);
}
