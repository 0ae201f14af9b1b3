#include "air/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return air::run_cli(argc, argv, std::cout, std::cerr); }
