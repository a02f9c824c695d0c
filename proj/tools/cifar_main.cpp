#include <iostream>

#include "cifar/cli.hpp"

int main(int argc, char** argv) { return cifar::run_cli(argc, argv, std::cout, std::cerr); }
