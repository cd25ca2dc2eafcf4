#include <iostream>
#include <vector>

#include "vague/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return vague::cli::run(std::move(args), std::cout, std::cerr);
}
