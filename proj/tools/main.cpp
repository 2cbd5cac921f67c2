#include <iostream>
#include <string>
#include <vector>

#include "sur/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return sur::dispatch(args, std::cout, std::cerr);
}
