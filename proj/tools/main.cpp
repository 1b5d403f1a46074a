#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return mc3g::cli::run(argc, argv, std::cout, std::cerr); }
