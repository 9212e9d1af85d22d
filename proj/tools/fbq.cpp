#include <iostream>

#include "fbq/cli.hpp"

int main(int argc, char** argv) { return fbq::cli::main(argc, argv, std::cout, std::cerr); }
