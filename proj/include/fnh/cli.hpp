#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fnh::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kResolvedConfigName = "resolved_config.json";

// Runs one command line (without the program name), e.g.
// {"synth", "--corpus", "c", "--out", "d"}. Global flags --config, --seed and
// --out may appear before or after the subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_corpus(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_dehaze(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_eval(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_analyze(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fnh::cli
