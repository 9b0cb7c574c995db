#include <iostream>

#include "ucvme/cli/commands.hpp"

int main(int argc, char** argv) { return ucvme::cli::run(argc, argv, std::cout, std::cerr); }
