#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gcgpn/matrix.hpp"
#include "gcgpn/tape.hpp"

namespace gcgpn {

enum class OperatorKind {
  identity,
  semantic_file,
  taxonomy_path,
  attribute_cosine,
  proto_cosine,
  proto_l2,
  aux_seen_self,
  aux_novel_self,
  key_attention,
};

std::string_view to_string(OperatorKind k);
OperatorKind parse_operator_kind(std::string_view s);

bool is_semantic(OperatorKind k);
bool is_auxiliary(OperatorKind k);
bool is_dynamic(OperatorKind k);

enum class Normalization { none, row_softmax };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view s);

// Subset of the four seen/novel blocks of a joint-space operator.
// ss = rows seen / cols seen, sn = rows seen / cols novel, and so on.
struct BlockSet {
  static constexpr std::uint8_t ss = 1, sn = 2, ns = 4, nn = 8, all_bits = 15;
  std::uint8_t bits = all_bits;

  static BlockSet all() { return {all_bits}; }
  static BlockSet none() { return {0}; }
  bool contains(std::uint8_t b) const { return (bits & b) != 0; }
  bool is_all() const { return bits == all_bits; }
  friend bool operator==(BlockSet, BlockSet) = default;
};

// "all", "none" or a '+'-separated list such as "sn" or "ss+nn".
std::string to_string(BlockSet b);
BlockSet parse_block_set(std::string_view s);

struct OperatorSpec {
  OperatorKind kind = OperatorKind::attribute_cosine;
  Normalization normalization = Normalization::row_softmax;
  BlockSet block_mask = BlockSet::all();
  bool theta_trainable = true;
  bool scale_trainable = true;

  bool dynamic() const { return is_dynamic(kind); }
  friend bool operator==(const OperatorSpec&, const OperatorSpec&) = default;
};

// Validates the structural rules (auxiliary kinds are never normalised or
// masked; identity likewise). Throws ConfigError.
void validate(const OperatorSpec& spec);

std::string to_string(const OperatorSpec& spec);
OperatorSpec parse_operator_spec(std::string_view s);

// A materialised static operator over one episode's joint label space.
struct Operator {
  OperatorSpec spec;
  Matrix matrix;
  std::size_t num_seen = 0;
};

// 0/1 pattern with ones on the kept blocks.
Matrix block_mask(std::size_t num_seen, std::size_t num_novel, BlockSet keep);

// Rows and columns of `similarity` (indexed by universe position) permuted
// into the episode's joint ordering.
Matrix build_semantic(const Matrix& similarity, const std::vector<std::size_t>& joint_order);

struct AuxiliaryPair {
  Matrix seen_self;   // identity on the seen block
  Matrix novel_self;  // identity on the novel block
};
AuxiliaryPair auxiliary_operators(std::size_t num_seen, std::size_t num_novel);

struct BlockSplit {
  Matrix ss, sn, ns, nn;
};
BlockSplit split_blocks(const Matrix& b, std::size_t num_seen);

Matrix mask_blocks(const Matrix& b, std::size_t num_seen, BlockSet keep);

// Pairwise similarity of prototype rows inside the tape: cosine, or negative
// squared Euclidean distance (logits for a subsequent row softmax).
enum class PrototypeMetric { cosine, l2 };
Var dynamic_prototype_operator(Var prototypes, PrototypeMetric metric);

// Row softmax with learnable scale over the kept blocks.
Var normalize_operator(Var b, const Matrix& mask, Var inv_temperature);

// Novel->seen attention block: softmax_j(inv_temperature * cos(novel_i P, key_j))
// placed in the lower-left block of an otherwise zero joint operator.
Var key_attention_operator(Var seen_keys, Var novel_features, Var projection, Var inv_temperature);

}  // namespace gcgpn
