#include <iostream>

#include "svflow/cli.hpp"

int main(int argc, char** argv) { return svf::run_cli(argc, argv, std::cout, std::cerr); }
