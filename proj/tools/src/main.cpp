#include <iostream>

#include "bhpm/cli/commands.hpp"

int main(int argc, char** argv) { return bhpm::cli::run_cli(argc, argv, std::cout, std::cerr); }
