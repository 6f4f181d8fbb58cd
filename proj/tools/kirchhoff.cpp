#include <iostream>

#include "kirchhoff/cli.hpp"

int main(int argc, char** argv)
{
    return kirchhoff::main_entry(argc, argv, std::cout, std::cerr);
}
