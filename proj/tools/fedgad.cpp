#include <iostream>
#include <string>
#include <vector>

#include "fgad/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fgad::cli::main(args, std::cout, std::cerr);
}
