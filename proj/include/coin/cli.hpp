#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coin/config.hpp"

namespace coin {

// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int exit_code_for(const Error& e);

struct CliOptions {
  RunConfig config;
  std::filesystem::path topk_curve;  // score: CSV destination when set
  std::filesystem::path pred_dir;    // eval: directory of <id>.pred.pgm16
};

// Each command validates everything it needs before creating the output
// directory. They throw coin::Error; run_cli maps errors to exit codes.
void cmd_synth(const CliOptions& opts);
void cmd_propagate(const CliOptions& opts);
void cmd_score(const CliOptions& opts);
void cmd_distill(const CliOptions& opts);
void cmd_run(const CliOptions& opts);
void cmd_eval(const CliOptions& opts);

int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace coin
