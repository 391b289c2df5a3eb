#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"

// Batch front end. Every subcommand takes one strict JSON config object
// (unknown keys are errors) and produces one primary output: JSON for
// bound, lowerbound, verify and train, CSV for sweep. The primary output
// goes to --out or stdout; a run manifest goes to --manifest, to
// <out>.manifest.json, or to stderr.
namespace loralab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

nlohmann::json cmd_bound(const nlohmann::json& config);
std::string cmd_sweep(const nlohmann::json& config, std::uint64_t seed,
                      nlohmann::json* cell_summary = nullptr);
nlohmann::json cmd_lowerbound(const nlohmann::json& config, std::uint64_t seed);
nlohmann::json cmd_verify(const nlohmann::json& config, std::uint64_t seed);
nlohmann::json cmd_train(const nlohmann::json& config, std::uint64_t seed);

// Canonical text of a JSON report (two-space indent, trailing newline).
std::string render(const nlohmann::json& report);

struct Invocation {
  std::string command;
  std::optional<std::string> config_path;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> manifest;
};

// Executes a parsed invocation and returns the exit code.
int execute(const Invocation& inv, std::ostream& out, std::ostream& err);

// Parses argv and executes; usage errors exit with code 2.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace loralab::cli
