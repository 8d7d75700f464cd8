#include "cnc_cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cnc::cli::run(argc, argv, std::cout, std::cerr); }
