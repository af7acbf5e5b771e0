#include <iostream>

#include "pauseflow/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return pauseflow::run_cli(args, std::cout, std::cerr);
}
