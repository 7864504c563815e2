#include <string>
#include <vector>

#include "evs/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return evs::cli_main(args);
}
