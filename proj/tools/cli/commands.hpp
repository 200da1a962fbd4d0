#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"

namespace regimealloc::cli {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitComputation = 2, kExitConvergence = 3 };

/// The Gibbs chains did not pass the PSRF threshold and the run did not opt out.
class ConvergenceGateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Each stage reads its inputs from, and writes its artifacts to, the resolved
// output directory, then records itself in manifest.json.
void cmd_ingest(const RunConfig& cfg, std::ostream& log);
void cmd_cluster(const RunConfig& cfg, std::ostream& log);
void cmd_transitions(const RunConfig& cfg, std::ostream& log);
void cmd_mixing(const RunConfig& cfg, std::ostream& log);
void cmd_allocate(const RunConfig& cfg, std::ostream& log);
void cmd_backtest(const RunConfig& cfg, std::ostream& log);
/// Table reproduction from the shipped fixtures; throws ComputationError when a check fails.
void cmd_pipeline_from_fixtures(const RunConfig& cfg, const std::filesystem::path& fixtures_dir, std::ostream& log);
void cmd_reproduce_fixtures(const RunConfig& cfg, const std::filesystem::path& fixtures_dir, std::ostream& log);

/// Runs one stage and maps its failure onto an exit code, naming the stage in the message.
int run_stage(const std::string& stage, const std::function<void()>& body, std::ostream& err);

/// Full command-line entry point; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace regimealloc::cli
