#include <iostream>
#include <string>
#include <vector>

#include "fident/cli.hpp"

int main(int argc, char* argv[]) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fident::cli::run(std::move(args), std::cout, std::cerr);
}
