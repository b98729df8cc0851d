#include <string>
#include <vector>

#include "minmaxent/cli.hpp"

int main(int argc, char** argv) {
    return mme::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
