#include <iostream>

#include "kpose/cli.hpp"

int main(int argc, char** argv) { return kpose::cli::run(argc, argv, std::cout, std::cerr); }
