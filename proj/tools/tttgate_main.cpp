#include <iostream>
#include <string>
#include <vector>

#include "tttgate/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return tttgate::cli::run(args, std::cout, std::cerr);
}
