#include <string>
#include <vector>

#include "qaspr/cli.hpp"

int main(int argc, char** argv) { return qaspr::run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
