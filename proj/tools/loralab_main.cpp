#include <iostream>

#include "loralab/cli.hpp"

int main(int argc, char** argv) { return loralab::cli::main_entry(argc, argv, std::cout, std::cerr); }
