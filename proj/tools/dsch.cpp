#include <iostream>

#include "dsch/cli.hpp"

int main(int argc, char** argv) { return dsch::cli::run(argc, argv, std::cout, std::cerr); }
