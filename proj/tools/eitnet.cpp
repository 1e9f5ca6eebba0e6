#include <iostream>

#include "eitnet/cli.hpp"

int main(int argc, char** argv) { return eitnet::dispatch(argc, argv, std::cout, std::cerr); }
