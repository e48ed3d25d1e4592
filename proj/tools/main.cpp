#include <iostream>

#include "gdfpca/cli.hpp"

int main(int argc, char** argv) { return gdfpca::run_cli(argc, argv, std::cout, std::cerr); }
