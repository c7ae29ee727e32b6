// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 vulread contributors

#include <iostream>
#include <string>
#include <vector>

#include "vulread/cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return vulread::cli::run(args, std::cout, std::cerr);
}
