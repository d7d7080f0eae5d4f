#include <vector>

#include "clpc/cli.hpp"

int main(int argc, char** argv) {
    return clpc::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
