#include <vector>

#include "steerlab/cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return steerlab::cli::run(args);
}
