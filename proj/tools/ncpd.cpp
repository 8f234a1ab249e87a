#include <iostream>

#include "ncpd/cli.hpp"

int main(int argc, char** argv) { return ncpd::cli::run(argc, argv, std::cout, std::cerr); }
