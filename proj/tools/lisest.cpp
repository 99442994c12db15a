#include <iostream>

#include "lisest/cli.hpp"

int main(int argc, char** argv) { return lisest::cli::run(argc, argv, std::cout, std::cerr); }
