#include <iostream>

#include "c4mas/cli.hpp"

int main(int argc, char** argv) { return c4mas::run_cli(argc, argv, std::cout, std::cerr); }
