#include <iostream>
#include <string>
#include <vector>

#include "nwband/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nwband::run_cli(args, std::cout, std::cerr);
}
