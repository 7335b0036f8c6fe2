#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "gcgpn/dataset.hpp"
#include "gcgpn/matrix.hpp"
#include "gcgpn/ops.hpp"
#include "gcgpn/random.hpp"
#include "gcgpn/tape.hpp"

namespace gcgpn::fixtures {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

// sum(y .* w) for a fixed random w: turns any op output into a scalar with
// a non-trivial upstream gradient.
inline Var weighted_sum(Var y, const Matrix& w) { return sum(hadamard(y, y.tape()->constant(w))); }

inline SyntheticSpec small_spec(std::uint64_t seed = 0) {
  SyntheticSpec s;
  s.n_train = 10;
  s.n_novel_val = 6;
  s.n_novel_test = 6;
  s.d_attr = 4;
  s.d_in = 6;
  s.per_class = 24;
  s.seed = seed;
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gcgpn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gcgpn::fixtures

#include <algorithm>
#include <set>

#include "gcgpn/episode.hpp"

namespace gcgpn::fixtures {

// Empty when ep satisfies partition, disjointness and cardinality laws for
// cfg; otherwise a description of the first violation. `test_pool` selects
// the meta-test rules (all train classes seen, seen queries from holdout).
inline std::string episode_violation(const Dataset& ds, const Episode& ep, const EpisodeConfig& cfg,
                                     const NovelPool* test_pool = nullptr) {
  const std::size_t n_seen = ep.num_seen();
  const std::set<std::size_t> seen(ep.seen_labels.begin(), ep.seen_labels.end());
  const std::set<std::size_t> novel(ep.novel_labels.begin(), ep.novel_labels.end());
  if (seen.size() != ep.seen_labels.size() || novel.size() != ep.novel_labels.size()) return "duplicate label";
  for (std::size_t c : novel) {
    if (seen.count(c)) return "class in both label spaces";
  }
  if (ep.num_novel() != cfg.n_way) return "wrong N";
  const auto train = ds.classes_in(Split::train);
  if (test_pool == nullptr) {
    if (n_seen + ep.num_novel() != train.size()) return "train partition does not cover train classes";
    for (std::size_t c : ep.joint_labels()) {
      if (ds.cls(c).split != Split::train) return "non-train class in training episode";
    }
  } else {
    if (ep.seen_labels != train) return "seen label space is not all train classes";
    const Split want = *test_pool == NovelPool::novel_val ? Split::novel_val : Split::novel_test;
    for (std::size_t c : novel) {
      if (ds.cls(c).split != want) return "novel class from wrong pool";
    }
  }
  if (ep.support_refs.size() != cfg.n_way * cfg.k_shot || ep.support.rows() != ep.support_refs.size()) {
    return "support cardinality";
  }
  if (ep.num_queries() != cfg.n_way * cfg.novel_queries + n_seen * cfg.seen_queries ||
      ep.queries.rows() != ep.num_queries() || ep.query_refs.size() != ep.num_queries()) {
    return "query cardinality";
  }
  for (std::size_t i = 0; i < ep.support_refs.size(); ++i) {
    if (ep.support_refs[i].cls != ep.novel_labels[i / cfg.k_shot]) return "support grouped wrongly";
  }
  std::set<InstanceRef> support(ep.support_refs.begin(), ep.support_refs.end());
  std::set<InstanceRef> queries(ep.query_refs.begin(), ep.query_refs.end());
  if (support.size() != ep.support_refs.size() || queries.size() != ep.query_refs.size()) return "repeated instance";
  for (const auto& r : support) {
    if (queries.count(r)) return "support instance reused as query";
  }
  const auto joint = ep.joint_labels();
  std::vector<std::size_t> per_label(joint.size(), 0);
  for (std::size_t q = 0; q < ep.num_queries(); ++q) {
    const std::size_t label = ep.query_labels[q];
    if (label >= joint.size()) return "query label out of range";
    if (joint[label] != ep.query_refs[q].cls) return "query label does not match its class";
    ++per_label[label];
    if (test_pool != nullptr && label < n_seen) {
      const Portion want = *test_pool == NovelPool::novel_val ? Portion::val : Portion::test;
      const auto rows = ds.cls(joint[label]).rows(want);
      if (std::find(rows.begin(), rows.end(), ep.query_refs[q].row) == rows.end()) return "seen query outside holdout";
    }
  }
  for (std::size_t l = 0; l < joint.size(); ++l) {
    if (per_label[l] != (l < n_seen ? cfg.seen_queries : cfg.novel_queries)) return "per-class query count";
  }
  for (std::size_t i = 0; i < ep.support_refs.size(); ++i) {
    const auto& r = ep.support_refs[i];
    const auto src = ds.cls(r.cls).instances.row(r.row);
    if (!std::equal(src.begin(), src.end(), ep.support.row(i).begin())) return "support features mismatch";
  }
  return {};
}

}  // namespace gcgpn::fixtures

#include <cmath>
#include <span>

#include "gcgpn/model.hpp"

namespace gcgpn::fixtures {

// Plain-loop helpers; no tape, no graph code.
inline std::vector<double> unit(std::vector<double> v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double n = std::sqrt(n2);
  if (n > 1e-12) {
    for (double& x : v) x /= n;
  }
  return v;
}

inline std::vector<double> linear_features(const Model& m, std::span<const double> x) {
  const Matrix& w = m.extractor_weights.at(0).value;
  const Matrix& b = m.extractor_biases.at(0).value;
  std::vector<double> out(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (std::size_t k = 0; k < w.rows(); ++k) s += x[k] * w(k, j);
    out[j] = s;
  }
  return out;
}

// Support-mean prototypes per novel class from normalised linear features.
inline std::vector<std::vector<double>> support_means(const Model& m, const Episode& ep) {
  std::vector<std::vector<double>> out;
  for (std::size_t n = 0; n < ep.num_novel(); ++n) {
    std::vector<double> acc(m.config().d, 0.0);
    for (std::size_t k = 0; k < ep.shot_count; ++k) {
      const auto z = unit(linear_features(m, ep.support.row(n * ep.shot_count + k)));
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += z[j];
    }
    for (double& a : acc) a /= double(ep.shot_count);
    out.push_back(acc);
  }
  return out;
}

// Prototype classifier written out directly: cosine to [seen ; support
// means], scaled by exp(tau), softmaxed. Linear extractor only.
inline Matrix prototype_softmax_oracle(const Model& m, const Episode& ep) {
  std::vector<std::vector<double>> protos;
  for (std::size_t s : ep.seen_labels) {
    const auto row = m.seen_prototypes.value.row(m.prototype_row(s));
    protos.push_back(unit({row.begin(), row.end()}));
  }
  for (auto& p : support_means(m, ep)) protos.push_back(unit(p));
  const double tau = std::exp(m.tau.value.item());
  Matrix out(ep.num_queries(), protos.size());
  for (std::size_t q = 0; q < ep.num_queries(); ++q) {
    const auto z = unit(linear_features(m, ep.queries.row(q)));
    std::vector<double> logits(protos.size());
    double mx = -1e300;
    for (std::size_t c = 0; c < protos.size(); ++c) {
      double dot = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) dot += z[j] * protos[c][j];
      logits[c] = tau * dot;
      mx = std::max(mx, logits[c]);
    }
    double total = 0.0;
    for (double& l : logits) total += (l = std::exp(l - mx));
    for (std::size_t c = 0; c < protos.size(); ++c) out(q, c) = logits[c] / total;
  }
  return out;
}

}  // namespace gcgpn::fixtures
