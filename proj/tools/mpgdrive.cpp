#include <iostream>

#include "mpgdrive/cli.hpp"

int main(int argc, char** argv) { return mpgdrive::cli::run(argc, argv, std::cout, std::cerr); }
