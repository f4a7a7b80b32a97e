#include <iostream>

#include "fptscale/cli.hpp"

int main(int argc, char** argv) { return fpt::cli::run(argc, argv, std::cout, std::cerr); }
