#include <iostream>

#include "gseg_cli/commands.hpp"

int main(int argc, char** argv) { return gseg::cli::run_cli(argc, argv, std::cout, std::cerr); }
