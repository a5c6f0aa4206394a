#include "tfcgc/cli.hpp"

#include <iostream>

int main(int argc, char **argv) {
  return tfcgc::run_cli(argc, argv, std::cout, std::cerr);
}
