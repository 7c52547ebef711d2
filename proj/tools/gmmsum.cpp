#include <iostream>

#include "gmmsum/cli.hpp"

int main(int argc, char** argv) { return gmmsum::run_cli(argc, argv, std::cout, std::cerr); }
