#include "gorder/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return gorder::run_cli(argc, argv, std::cout, std::cerr); }
