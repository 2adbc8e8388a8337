#include <iostream>

#include "scsf/cli.hpp"

int main(int argc, char** argv) { return scsf::run_cli(argc, argv, std::cout, std::cerr); }
