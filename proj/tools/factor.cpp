#include <iostream>

#include "qsieve/cli.hpp"

int main(int argc, char** argv) {
    return qsieve::cli::run(argc, argv, std::cout, std::cerr);
}
