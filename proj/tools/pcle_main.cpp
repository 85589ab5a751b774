#include <iostream>

#include "pcle/cli.hpp"

int main(int argc, char** argv) { return pcle::cli::run(argc, argv, std::cout, std::cerr); }
