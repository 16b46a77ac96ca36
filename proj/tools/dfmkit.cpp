#include <iostream>

#include "dfm/cli.hpp"

int main(int argc, char** argv) { return dfm::cli::run(argc, argv, std::cout, std::cerr); }
