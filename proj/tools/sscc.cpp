#include <iostream>

#include "sscc/cli.hpp"

int main(int argc, char** argv) { return sscc::run_cli(argc, argv, std::cout, std::cerr); }
