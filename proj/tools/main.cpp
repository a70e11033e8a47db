#include <string>
#include <vector>

#include "cladyn/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cladyn::dispatch(args);
}
