#include <iostream>

#include "e2f/cli.hpp"

int main(int argc, char** argv) {
  return e2f::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
