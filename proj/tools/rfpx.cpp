#include <iostream>

#include "rfpx/cli/cli.hpp"

int main(int argc, char** argv) { return rfpx::cli::cli_dispatch(argc, argv, std::cout, std::cerr); }
