#include "edgetrace/cli.h"

#include <iostream>

int main(int argc, char **argv) { return edgetrace::run_cli(argc, argv, std::cout, std::cerr); }
