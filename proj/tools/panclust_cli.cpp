// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#include "panclust/cli.hpp"

int main(int argc, char** argv) { return panclust::run_cli(argc, argv); }
