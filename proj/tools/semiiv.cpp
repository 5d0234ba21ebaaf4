#include <iostream>

#include "semiiv/cli.hpp"

int main(int argc, char** argv) { return semiiv::cli::run(argc, argv, std::cout, std::cerr); }
