#include <iostream>

#include "clv/cli.hpp"

int main(int argc, char** argv) { return clv::run_cli(argc, argv, std::cout, std::cerr); }
