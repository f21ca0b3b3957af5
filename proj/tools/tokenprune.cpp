// Copyright (C) 2026 The tokenprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "tokenprune/cli.hpp"

int main(int argc, char** argv) {
    return tokenprune::cli::run_cli(argc, argv, std::cout, std::cerr);
}
