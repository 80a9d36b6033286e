#include <iostream>

#include "ksmith/cli.hpp"

int main(int argc, char** argv) { return ksmith::run_cli(argc, argv, std::cout, std::cerr); }
