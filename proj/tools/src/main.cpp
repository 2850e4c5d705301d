#include <iostream>

#include "rmpt/cli/commands.hpp"

int main(int argc, char** argv) { return rmpt::cli::run(argc, argv, std::cout, std::cerr); }
