// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "skf/cli.hpp"

int main(int argc, char** argv) {
  return skf::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
