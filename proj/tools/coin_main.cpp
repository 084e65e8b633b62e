#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "coin/cli.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("coin"));
  spdlog::set_pattern("%^%l%$: %v");
  return coin::run_cli(argc, argv);
}
