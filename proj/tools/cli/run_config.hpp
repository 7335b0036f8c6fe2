#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gcgpn/dataset.hpp"
#include "gcgpn/eval.hpp"
#include "gcgpn/model.hpp"
#include "gcgpn/operators.hpp"
#include "gcgpn/trainer.hpp"

namespace gcgpn::cli {

enum class OperatorSource { attributes, taxonomy };

// Everything a command needs. Every field has a default; the INI file and
// the command-line flags only override.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "gcgpn_out";

  std::string dataset;  // directory; empty means generate from `synth`
  SyntheticSpec synth;

  OperatorSource source = OperatorSource::attributes;
  std::string taxonomy;    // parent<TAB>child edge file
  std::string similarity;  // CSV for semantic_file operators
  OperatorKind semantic_kind = OperatorKind::attribute_cosine;
  bool shuffle_operator = false;

  std::string variant = "gcgpn-aux";  // a preset name, or "custom"
  ModelConfig model;

  TrainConfig train;
  EvalConfig eval;
  std::string checkpoint;

  std::vector<std::string> ablate_variants;
  std::vector<std::size_t> k_values{1, 5};

  double grad_step = 1e-5;
  double grad_tolerance = 1e-4;
  std::vector<std::string> grad_variants;

  RunConfig();
};

// Reads an INI file over the defaults. Unknown sections or keys throw
// ConfigError naming "section.key".
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& ini_text);

// Sets one "section.key" from text; same validation as the file parser.
void set_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

// Complete INI rendering of every key; parsing it back reproduces cfg.
std::string render(const RunConfig& cfg);

// Seeds of the independent random streams of a run.
std::uint64_t model_seed(const RunConfig& cfg);
std::uint64_t train_seed(const RunConfig& cfg);
std::uint64_t eval_seed(const RunConfig& cfg);
std::uint64_t shuffle_seed(const RunConfig& cfg);

}  // namespace gcgpn::cli
