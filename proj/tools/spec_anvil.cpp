#include <iostream>

#include "anvil/cli/cli.hpp"

int main(int argc, char** argv) { return anvil::cli::run_cli(argc, argv, std::cout, std::cerr); }
