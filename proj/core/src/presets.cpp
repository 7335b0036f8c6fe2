#include "gcgpn/presets.hpp"

#include <algorithm>

#include "gcgpn/errors.hpp"

namespace gcgpn {

namespace {

OperatorSpec semantic_op(OperatorKind kind, BlockSet blocks) {
  return {kind, Normalization::row_softmax, blocks, true, true};
}

OperatorSpec fixed(OperatorKind kind) { return {kind, Normalization::none, BlockSet::all(), true, true}; }

std::vector<OperatorSpec> aux() { return {fixed(OperatorKind::aux_seen_self), fixed(OperatorKind::aux_novel_self)}; }

std::vector<OperatorSpec> split(OperatorKind kind) {
  return {semantic_op(kind, BlockSet{BlockSet::ss}), semantic_op(kind, BlockSet{BlockSet::sn}),
          semantic_op(kind, BlockSet{BlockSet::ns}), semantic_op(kind, BlockSet{BlockSet::nn})};
}

std::vector<OperatorSpec> join(std::vector<OperatorSpec> a, const std::vector<OperatorSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string_view canonical(std::string_view name) {
  if (name == "gcgpn-aux-fcθ" || name == "gcgpn-aux-fc") return "gcgpn-aux-fctheta";
  return name;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{
      "pn_plus",      "dfsl_avg",      "gcgpn",        "gcgpn-aux",         "gcgpn-split", "gcgpn-aux-split",
      "gcgpn-cos-aux", "gcgpn-l2-aux", "gcgpn-aux-sn", "gcgpn-aux-fctheta", "dfsl_att"};
  return names;
}

bool is_preset(std::string_view name) {
  const auto& names = preset_names();
  return std::find(names.begin(), names.end(), canonical(name)) != names.end();
}

ModelConfig apply_preset(std::string_view requested, ModelConfig cfg, OperatorKind semantic) {
  if (!is_semantic(semantic)) {
    throw ConfigError("preset semantic operator must be a semantic kind, got '" +
                      std::string(to_string(semantic)) + "'");
  }
  const std::string_view name = canonical(requested);
  const OperatorSpec b = semantic_op(semantic, BlockSet::all());
  cfg.special_case = SpecialCase::none;
  cfg.theta_form = ThetaForm::diagonal;
  cfg.variant = std::string(name);

  if (name == "pn_plus") {
    cfg.special_case = SpecialCase::pn_plus;
  } else if (name == "dfsl_avg") {
    cfg.special_case = SpecialCase::dfsl_avg;
  } else if (name == "gcgpn") {
    cfg.operators = {b};
  } else if (name == "gcgpn-aux") {
    cfg.operators = join({b}, aux());
  } else if (name == "gcgpn-split") {
    cfg.operators = split(semantic);
  } else if (name == "gcgpn-aux-split") {
    cfg.operators = join(split(semantic), aux());
  } else if (name == "gcgpn-cos-aux") {
    cfg.operators = join({semantic_op(OperatorKind::proto_cosine, BlockSet::all())}, aux());
  } else if (name == "gcgpn-l2-aux") {
    cfg.operators = join({semantic_op(OperatorKind::proto_l2, BlockSet::all())}, aux());
  } else if (name == "gcgpn-aux-sn") {
    // Seen-to-novel edges live in the novel-row / seen-column block.
    cfg.operators = join({semantic_op(semantic, BlockSet{BlockSet::ns})}, aux());
  } else if (name == "gcgpn-aux-fctheta") {
    cfg.operators = join({b}, aux());
    cfg.theta_form = ThetaForm::full;
  } else if (name == "dfsl_att") {
    cfg.operators = aux();
    cfg.operators[0].theta_trainable = false;
    cfg.operators[0].scale_trainable = false;
    cfg.operators[1].scale_trainable = false;
    cfg.operators.push_back({OperatorKind::key_attention, Normalization::none, BlockSet::all(), true, true});
  } else {
    throw ConfigError("unknown variant '" + std::string(requested) + "'");
  }
  return finalize(std::move(cfg));
}

}  // namespace gcgpn
