#include <iostream>

#include "flowcurv/cli.hpp"

int main(int argc, char** argv) { return flowcurv::cli::run(argc, argv, std::cout, std::cerr); }
