#include <iostream>

#include "hmfront/cli.hpp"

int main(int argc, char** argv) { return hmfront::run_cli(argc, argv, std::cout, std::cerr); }
