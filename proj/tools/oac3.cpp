#include "oac3/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return oac3::cli::main_entry(argc, argv, std::cout, std::cerr);
}
