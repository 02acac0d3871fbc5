#include "hypmix/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hypmix::dispatch(argc, argv, std::cout, std::cerr); }
