#include <iostream>

#include "layerscope/cli.hpp"

int main(int argc, char** argv) { return layerscope::cli::run(argc, argv, std::cout, std::cerr); }
