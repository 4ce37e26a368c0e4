#include <string>
#include <vector>

#include "mapo/cli.hpp"

int main(int argc, char** argv) {
    return mapo::cli::run(std::vector<std::string>(argv, argv + argc));
}
