#include <iostream>

#include "coldstart/cli.hpp"

int main(int argc, char** argv) { return coldstart::run_cli(argc, argv, std::cout, std::cerr); }
