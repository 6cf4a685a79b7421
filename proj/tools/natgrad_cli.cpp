#include <iostream>

#include "natgrad/cli.hpp"

int main(int argc, char** argv) { return natgrad::run_cli(argc, argv, std::cout, std::cerr); }
