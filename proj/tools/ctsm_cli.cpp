#include <iostream>

#include "ctsm/cli.hpp"

int main(int argc, char** argv) {
    return ctsm::cli::run(argc, argv, std::cout, std::cerr);
}
