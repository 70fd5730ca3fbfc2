// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("agentpso"));
  std::vector<std::string> args(argv + 1, argv + argc);
  return agentpso::cli::run(args, std::cout, std::cerr);
}
