#include <iostream>

#include "shuttle/cli.hpp"

int main(int argc, char** argv) { return shuttle::cli::run(argc, argv, std::cout, std::cerr); }
