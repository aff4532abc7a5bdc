#include <string>
#include <vector>

#include "relactrl/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return relactrl::run_cli(args);
}
