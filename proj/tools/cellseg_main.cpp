#include <string>
#include <vector>

#include "cellseg/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cellseg::cli::run(args);
}
