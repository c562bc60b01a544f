#include <iostream>
#include <string>
#include <vector>

#include "sparseplan/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return sparseplan::cli::main_entry(args, std::cout, std::cerr);
}
