// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "lid/cli.hpp"

int main(int argc, char** argv) {
  return lid::cli::main(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
