#include <iostream>

#include "craft/cli.hpp"

int main(int argc, char** argv) { return craft::cli::run_cli(argc, argv, std::cout, std::cerr); }
