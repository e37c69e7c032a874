#include <iostream>

#include "optospike/cli.hpp"

int main(int argc, char** argv) { return optospike::run_cli(argc, argv, std::cout, std::cerr); }
