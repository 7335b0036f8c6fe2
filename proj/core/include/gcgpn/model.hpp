#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gcgpn/dataset.hpp"
#include "gcgpn/episode.hpp"
#include "gcgpn/matrix.hpp"
#include "gcgpn/operators.hpp"
#include "gcgpn/parameter.hpp"
#include "gcgpn/tape.hpp"

namespace gcgpn {

enum class ExtractorKind { identity, linear, mlp };
enum class Rho { identity, relu };
enum class ThetaForm { diagonal, full };
enum class SpecialCase { none, pn_plus, dfsl_avg };

struct ModelConfig {
  ExtractorKind extractor = ExtractorKind::linear;
  std::vector<std::size_t> hidden;  // mlp hidden widths
  std::size_t d = 32;
  std::size_t layers = 1;
  Rho rho = Rho::identity;
  ThetaForm theta_form = ThetaForm::diagonal;
  std::vector<OperatorSpec> operators;
  double tau_init = 1.0;
  double operator_temperature_init = 1.0;
  std::size_t key_dim = 0;  // 0 means d
  SpecialCase special_case = SpecialCase::none;
  std::string variant = "custom";

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Enforces the special-case structure (pn_plus, dfsl_avg) and checks every
// operator spec. Returns the normalised config.
ModelConfig finalize(ModelConfig cfg);

// Flat key/value form used by checkpoints and config echoes.
std::map<std::string, std::string> to_key_values(const ModelConfig& cfg);
ModelConfig model_config_from_key_values(const std::map<std::string, std::string>& kv);

struct OperatorParams {
  Parameter temperature;  // log of the softmax scale; present when normalized or key_attention
  Parameter keys;         // key_attention only: one row per seen class
  Parameter projection;   // key_attention only: d x key_dim
};

struct LayerParams {
  std::vector<Parameter> theta;  // per operator: 1 x d (diagonal) or d x d
  std::vector<Parameter> scale;  // per operator: 1 x 1
};

// Prototype model over a fixed class universe (the dataset's class ids).
// Seen prototypes exist for every train class of that universe.
class Model {
 public:
  Model() = default;
  // `semantic` is the universe x universe similarity consumed by semantic
  // operators; it may be empty when the config has none.
  Model(ModelConfig config, std::vector<std::string> universe, std::vector<std::size_t> seen_classes,
        std::size_t d_in, Matrix semantic, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& universe() const noexcept { return universe_; }
  const std::vector<std::size_t>& seen_classes() const noexcept { return seen_classes_; }
  std::size_t d_in() const noexcept { return d_in_; }
  const Matrix& semantic() const noexcept { return semantic_; }
  void set_semantic(Matrix semantic);

  // Row of the seen-prototype matrix for a universe class; throws when the
  // class has no learned prototype.
  std::size_t prototype_row(std::size_t universe_index) const;

  // Declaration order: extractor, seen prototypes, tau, per-operator
  // parameters, then per layer theta and scale of each operator.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  std::vector<Parameter> extractor_weights;
  std::vector<Parameter> extractor_biases;
  Parameter seen_prototypes;
  Parameter tau;  // log of the classifier temperature
  std::vector<OperatorParams> operator_params;
  std::vector<LayerParams> layer_params;

 private:
  ModelConfig config_;
  std::vector<std::string> universe_;
  std::vector<std::size_t> seen_classes_;
  std::vector<std::ptrdiff_t> prototype_row_;
  std::size_t d_in_ = 0;
  Matrix semantic_;
};

// Builds a model over ds: universe = ds.class_ids(), seen = train classes.
// Attribute-cosine operators take their similarity from ds when `semantic`
// is empty.
Model make_model(const ModelConfig& config, const Dataset& ds, std::uint64_t seed,
                 Matrix semantic = {});

struct ForwardResult {
  Var support_features;
  Var query_features;
  Var prototypes;          // C: seen rows then initial novel rows
  Var updated_prototypes;  // C' after the graph-convolution block
  Var log_probs;           // per query over the classifier label space
  Var loss;
  std::vector<std::size_t> labels;  // targets aligned with log_probs rows
};

// Building blocks, usable on either a mutable model (trainable leaves) or a
// const model (constants, non-recording tape).
Var extract_features(Model& m, Tape& t, const Matrix& x);
Var extract_features(const Model& m, Tape& t, const Matrix& x);

// Mean of row-normalised support features, K consecutive rows per class.
Var init_novel_prototypes(Var support_features, std::size_t k_shot);

// log softmax_j(tau * cos(z, c'_j)).
Var classify(Var queries, Var prototypes, Var tau);

Var graph_conv_block(Model& m, Tape& t, Var prototypes, const Episode& ep);
Var graph_conv_block(const Model& m, Tape& t, Var prototypes, const Episode& ep);

// Full pipeline with cross-entropy over the joint label space.
ForwardResult forward_episode(Model& m, const Episode& ep, Tape& t);
ForwardResult forward_episode(const Model& m, const Episode& ep, Tape& t);

// Same pipeline restricted to the novel label space; only novel queries
// contribute and labels are novel-local.
ForwardResult forward_fsl(Model& m, const Episode& ep, Tape& t);
ForwardResult forward_fsl(const Model& m, const Episode& ep, Tape& t);

// Joint-space class probabilities (queries x joint classes), no gradients.
Matrix predict_probabilities(const Model& m, const Episode& ep);

// Replaces every seen prototype by the mean row-normalised feature over the
// class's training portion (the PN+ way of obtaining seen prototypes).
void set_prototypes_from_data(Model& m, const Dataset& ds);

std::string_view to_string(ExtractorKind k);
std::string_view to_string(Rho r);
std::string_view to_string(ThetaForm f);
std::string_view to_string(SpecialCase s);
ExtractorKind parse_extractor_kind(std::string_view s);
Rho parse_rho(std::string_view s);
ThetaForm parse_theta_form(std::string_view s);
SpecialCase parse_special_case(std::string_view s);

}  // namespace gcgpn
