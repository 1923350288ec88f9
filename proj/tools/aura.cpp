#include <iostream>

#include "aura/cli.hpp"

int main(int argc, char** argv) { return aura::cli::main(argc, argv, std::cout, std::cerr); }
