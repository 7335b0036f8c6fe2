#include "gcgpn/operators.hpp"

#include <array>

#include "gcgpn/errors.hpp"
#include "gcgpn/ops.hpp"
#include "text_util.hpp"

namespace gcgpn {
namespace {

constexpr std::array<std::pair<OperatorKind, std::string_view>, 9> kKindNames{{
    {OperatorKind::identity, "identity"},
    {OperatorKind::semantic_file, "semantic_file"},
    {OperatorKind::taxonomy_path, "taxonomy_path"},
    {OperatorKind::attribute_cosine, "attribute_cosine"},
    {OperatorKind::proto_cosine, "proto_cosine"},
    {OperatorKind::proto_l2, "proto_l2"},
    {OperatorKind::aux_seen_self, "aux_seen_self"},
    {OperatorKind::aux_novel_self, "aux_novel_self"},
    {OperatorKind::key_attention, "key_attention"},
}};

}  // namespace

std::string_view to_string(OperatorKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "identity";
}

OperatorKind parse_operator_kind(std::string_view s) {
  for (const auto& [kind, name] : kKindNames) {
    if (name == s) return kind;
  }
  throw ConfigError("unknown operator kind '" + std::string(s) + "'");
}

bool is_semantic(OperatorKind k) {
  return k == OperatorKind::semantic_file || k == OperatorKind::taxonomy_path ||
         k == OperatorKind::attribute_cosine;
}

bool is_auxiliary(OperatorKind k) {
  return k == OperatorKind::aux_seen_self || k == OperatorKind::aux_novel_self;
}

bool is_dynamic(OperatorKind k) {
  return k == OperatorKind::proto_cosine || k == OperatorKind::proto_l2 ||
         k == OperatorKind::key_attention;
}

std::string_view to_string(Normalization n) {
  return n == Normalization::none ? "none" : "row_softmax";
}

Normalization parse_normalization(std::string_view s) {
  if (s == "none") return Normalization::none;
  if (s == "row_softmax") return Normalization::row_softmax;
  throw ConfigError("unknown normalization '" + std::string(s) + "'");
}

std::string to_string(BlockSet b) {
  if (b.is_all()) return "all";
  if (b.bits == 0) return "none";
  std::string out;
  const std::array<std::pair<std::uint8_t, const char*>, 4> names{
      {{BlockSet::ss, "ss"}, {BlockSet::sn, "sn"}, {BlockSet::ns, "ns"}, {BlockSet::nn, "nn"}}};
  for (const auto& [bit, name] : names) {
    if (!b.contains(bit)) continue;
    if (!out.empty()) out += '+';
    out += name;
  }
  return out;
}

BlockSet parse_block_set(std::string_view s) {
  s = detail::trim(s);
  if (s == "all") return BlockSet::all();
  if (s == "none" || s.empty()) return BlockSet::none();
  BlockSet out = BlockSet::none();
  for (auto part : detail::split(s, '+')) {
    part = detail::trim(part);
    if (part == "ss") out.bits |= BlockSet::ss;
    else if (part == "sn") out.bits |= BlockSet::sn;
    else if (part == "ns") out.bits |= BlockSet::ns;
    else if (part == "nn") out.bits |= BlockSet::nn;
    else throw ConfigError("unknown block '" + std::string(part) + "'");
  }
  return out;
}

void validate(const OperatorSpec& spec) {
  const bool fixed_structure = is_auxiliary(spec.kind) || spec.kind == OperatorKind::identity;
  if (fixed_structure && spec.normalization != Normalization::none) {
    throw ConfigError(std::string(to_string(spec.kind)) + " operators are never normalized");
  }
  if (fixed_structure && !spec.block_mask.is_all()) {
    throw ConfigError(std::string(to_string(spec.kind)) + " operators are never masked");
  }
  if (spec.kind == OperatorKind::key_attention &&
      (spec.normalization != Normalization::none || !spec.block_mask.is_all())) {
    throw ConfigError("key_attention carries its own softmax and fixed lower-left block");
  }
}

// kind:normalization:blocks[:theta=fixed][:scale=fixed]
std::string to_string(const OperatorSpec& spec) {
  std::string out = std::string(to_string(spec.kind)) + ":" +
                    std::string(to_string(spec.normalization)) + ":" + to_string(spec.block_mask);
  if (!spec.theta_trainable) out += ":theta=fixed";
  if (!spec.scale_trainable) out += ":scale=fixed";
  return out;
}

OperatorSpec parse_operator_spec(std::string_view s) {
  const auto parts = detail::split(detail::trim(s), ':');
  OperatorSpec spec;
  spec.kind = parse_operator_kind(detail::trim(parts[0]));
  const bool fixed_structure = is_auxiliary(spec.kind) || spec.kind == OperatorKind::identity ||
                               spec.kind == OperatorKind::key_attention;
  spec.normalization = fixed_structure ? Normalization::none : Normalization::row_softmax;
  if (parts.size() > 1) spec.normalization = parse_normalization(detail::trim(parts[1]));
  if (parts.size() > 2) spec.block_mask = parse_block_set(parts[2]);
  for (std::size_t i = 3; i < parts.size(); ++i) {
    const auto flag = detail::trim(parts[i]);
    if (flag == "theta=fixed") spec.theta_trainable = false;
    else if (flag == "scale=fixed") spec.scale_trainable = false;
    else throw ConfigError("unknown operator flag '" + std::string(flag) + "'");
  }
  validate(spec);
  return spec;
}

Matrix block_mask(std::size_t num_seen, std::size_t num_novel, BlockSet keep) {
  const std::size_t n = num_seen + num_novel;
  Matrix m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const bool rs = r < num_seen;
      const bool cs = c < num_seen;
      const std::uint8_t bit = rs ? (cs ? BlockSet::ss : BlockSet::sn) : (cs ? BlockSet::ns : BlockSet::nn);
      m(r, c) = keep.contains(bit) ? 1.0 : 0.0;
    }
  }
  return m;
}

Matrix build_semantic(const Matrix& similarity, const std::vector<std::size_t>& joint_order) {
  Matrix out(joint_order.size(), joint_order.size());
  for (std::size_t i = 0; i < joint_order.size(); ++i) {
    for (std::size_t j = 0; j < joint_order.size(); ++j) {
      if (joint_order[i] >= similarity.rows() || joint_order[j] >= similarity.cols()) {
        throw LookupError("class index " + std::to_string(std::max(joint_order[i], joint_order[j])) +
                          " missing from " + shape_string(similarity) + " similarity matrix");
      }
      out(i, j) = similarity(joint_order[i], joint_order[j]);
    }
  }
  return out;
}

AuxiliaryPair auxiliary_operators(std::size_t num_seen, std::size_t num_novel) {
  const std::size_t n = num_seen + num_novel;
  AuxiliaryPair aux{Matrix(n, n), Matrix(n, n)};
  for (std::size_t i = 0; i < num_seen; ++i) aux.seen_self(i, i) = 1.0;
  for (std::size_t i = num_seen; i < n; ++i) aux.novel_self(i, i) = 1.0;
  return aux;
}

Matrix mask_blocks(const Matrix& b, std::size_t num_seen, BlockSet keep) {
  if (b.rows() != b.cols() || num_seen > b.rows()) {
    throw ShapeError("mask_blocks on " + shape_string(b) + " with " + std::to_string(num_seen) + " seen");
  }
  const Matrix mask = block_mask(num_seen, b.rows() - num_seen, keep);
  Matrix out = b;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i] == 0.0) out[i] = 0.0;
  }
  return out;
}

BlockSplit split_blocks(const Matrix& b, std::size_t num_seen) {
  return {mask_blocks(b, num_seen, {BlockSet::ss}), mask_blocks(b, num_seen, {BlockSet::sn}),
          mask_blocks(b, num_seen, {BlockSet::ns}), mask_blocks(b, num_seen, {BlockSet::nn})};
}

Var dynamic_prototype_operator(Var prototypes, PrototypeMetric metric) {
  return metric == PrototypeMetric::cosine ? cosine_similarity(prototypes, prototypes)
                                           : neg_sq_distances(prototypes);
}

Var normalize_operator(Var b, const Matrix& mask, Var inv_temperature) {
  return masked_softmax_rows(b, mask, inv_temperature);
}

Var key_attention_operator(Var seen_keys, Var novel_features, Var projection, Var inv_temperature) {
  if (novel_features.cols() != projection.rows() || projection.cols() != seen_keys.cols()) {
    throw ShapeError("key_attention: features " + shape_string(novel_features.value()) +
                     ", projection " + shape_string(projection.value()) + ", keys " +
                     shape_string(seen_keys.value()));
  }
  const std::size_t num_seen = seen_keys.rows();
  const std::size_t num_novel = novel_features.rows();
  Var projected = matmul(novel_features, projection);
  Var attention = softmax_rows(cosine_similarity(projected, seen_keys), inv_temperature);
  const std::size_t n = num_seen + num_novel;
  return embed_block(attention, n, n, num_seen, 0);
}

}  // namespace gcgpn
