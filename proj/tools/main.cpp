#include <string>
#include <vector>

#include "gankd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return gankd::cli::run_cli(args);
}
