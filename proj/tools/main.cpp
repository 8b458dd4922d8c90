#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cavg::cli::dispatch(argc, argv, std::cout, std::cerr); }
