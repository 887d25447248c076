#include <iostream>

#include "fdemm/cli.hpp"

int main(int argc, char** argv) { return fdemm::cli::run(argc, argv, std::cout, std::cerr); }
