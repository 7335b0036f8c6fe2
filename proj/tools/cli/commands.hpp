#pragma once

#include <iosfwd>
#include <string>

#include "cli/run_config.hpp"
#include "gcgpn/similarity.hpp"

namespace gcgpn::cli {

// Each command writes under cfg.out, echoes `config_text` verbatim to
// config.ini plus the fully resolved config to resolved_config.ini, re-reads
// its artifacts and returns the process exit status. Errors throw.
int cmd_synth(const RunConfig& cfg, const std::string& config_text, std::ostream& log);
int cmd_build_operator(const RunConfig& cfg, const std::string& config_text, std::ostream& log);
int cmd_train(const RunConfig& cfg, const std::string& config_text, std::ostream& log);
int cmd_eval(const RunConfig& cfg, const std::string& config_text, std::ostream& log);
int cmd_ablate(const RunConfig& cfg, const std::string& config_text, std::ostream& log);
int cmd_sweep_k(const RunConfig& cfg, const std::string& config_text, std::ostream& log);
// Exit status 1 when the worst relative error reaches cfg.grad_tolerance.
int cmd_gradcheck(const RunConfig& cfg, const std::string& config_text, std::ostream& log);

// Shared plumbing, exposed for tests.
Dataset load_data(const RunConfig& cfg);
SimilarityTable build_similarity(const RunConfig& cfg, const Dataset& ds);
ModelConfig resolve_model(const RunConfig& cfg, const std::string& variant);
EvalConfig resolve_eval(const RunConfig& cfg);
TrainConfig resolve_train(const RunConfig& cfg);

}  // namespace gcgpn::cli
