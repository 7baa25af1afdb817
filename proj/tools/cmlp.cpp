#include <iostream>
#include <string>
#include <vector>

#include "cmlp/cli/app.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cmlp::cli::run_cli(args, std::cout, std::cerr);
}
