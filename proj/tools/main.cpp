#include <string>
#include <vector>

#include "hsk/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hsk::cli::run(std::move(args));
}
