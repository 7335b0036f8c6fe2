#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gcgpn/dataset.hpp"
#include "gcgpn/matrix.hpp"

namespace gcgpn {

struct InstanceRef {
  std::size_t cls = 0;
  std::size_t row = 0;
  friend bool operator==(const InstanceRef&, const InstanceRef&) = default;
  friend auto operator<=>(const InstanceRef&, const InstanceRef&) = default;
};

// One N+-way K-shot task. Labels are dataset class indices; query labels
// index the joint ordering seen_labels ++ novel_labels.
struct Episode {
  std::vector<std::size_t> seen_labels;
  std::vector<std::size_t> novel_labels;
  std::size_t shot_count = 0;
  Matrix support;  // (N * K) x d_in, grouped by novel class
  Matrix queries;  // n_queries x d_in
  std::vector<std::size_t> query_labels;
  std::vector<InstanceRef> support_refs;
  std::vector<InstanceRef> query_refs;
  std::uint64_t seed = 0;

  std::size_t num_seen() const noexcept { return seen_labels.size(); }
  std::size_t num_novel() const noexcept { return novel_labels.size(); }
  std::size_t num_joint() const noexcept { return seen_labels.size() + novel_labels.size(); }
  std::size_t num_queries() const noexcept { return query_labels.size(); }
  bool is_novel_query(std::size_t q) const { return query_labels.at(q) >= seen_labels.size(); }
  // Joint-ordering class list.
  std::vector<std::size_t> joint_labels() const;
};

struct EpisodeConfig {
  std::size_t n_way = 5;         // N
  std::size_t k_shot = 1;        // K
  std::size_t novel_queries = 6; // Q per novel class
  std::size_t seen_queries = 1;  // B per seen class
};

enum class NovelPool { novel_val, novel_test };

// Training episode: N "fake" novel classes drawn from the train split, the
// rest of the train split acts as the seen label space.
Episode sample_train_episode(const Dataset& ds, const EpisodeConfig& cfg, std::uint64_t seed);

// Meta-test episode: every train class is seen (queries from the matching
// holdout portion), novel classes come from the pool.
Episode sample_test_episode(const Dataset& ds, NovelPool pool, const EpisodeConfig& cfg,
                            std::uint64_t seed);

}  // namespace gcgpn
