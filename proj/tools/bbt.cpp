#include <iostream>
#include <string>
#include <vector>

#include "bbt/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bbt::cli::main_entry(args, std::cout, std::cerr);
}
