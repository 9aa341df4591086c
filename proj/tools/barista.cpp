#include <iostream>

#include "barista/cli.hpp"

int main(int argc, char** argv) { return barista::run_cli(argc, argv, std::cout, std::cerr); }
