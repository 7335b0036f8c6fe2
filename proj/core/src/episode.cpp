#include "gcgpn/episode.hpp"

#include <algorithm>

#include "gcgpn/errors.hpp"
#include "gcgpn/random.hpp"

namespace gcgpn {

std::vector<std::size_t> Episode::joint_labels() const {
  std::vector<std::size_t> out(seen_labels);
  out.insert(out.end(), novel_labels.begin(), novel_labels.end());
  return out;
}

namespace {

// Draws `k` distinct rows out of `rows`, naming the class when it runs short.
std::vector<std::size_t> draw_rows(const ClassRecord& c, const std::vector<std::size_t>& rows,
                                   std::size_t k, const char* what, Rng& rng) {
  if (rows.size() < k) {
    throw SamplingError("class '" + c.id + "' has " + std::to_string(rows.size()) +
                        " instances available for " + what + ", needs " + std::to_string(k));
  }
  auto picks = random_sample(rows.size(), k, rng);
  for (auto& p : picks) p = rows[p];
  return picks;
}

struct Builder {
  const Dataset& ds;
  Episode ep;
  std::vector<std::vector<double>> support_rows;
  std::vector<std::vector<double>> query_rows;

  void add_support(std::size_t cls, std::size_t row) {
    const auto r = ds.cls(cls).instances.row(row);
    support_rows.emplace_back(r.begin(), r.end());
    ep.support_refs.push_back({cls, row});
  }
  void add_query(std::size_t cls, std::size_t row, std::size_t joint_label) {
    const auto r = ds.cls(cls).instances.row(row);
    query_rows.emplace_back(r.begin(), r.end());
    ep.query_refs.push_back({cls, row});
    ep.query_labels.push_back(joint_label);
  }
  static Matrix stack(const std::vector<std::vector<double>>& rows, std::size_t cols) {
    Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    return m;
  }
  Episode finish() {
    ep.support = stack(support_rows, ds.d_in());
    ep.queries = stack(query_rows, ds.d_in());
    return std::move(ep);
  }
};

void sample_novel_block(Builder& b, const EpisodeConfig& cfg, Portion portion, Rng& rng) {
  const std::size_t n_seen = b.ep.seen_labels.size();
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> novel_queries;
  for (std::size_t n = 0; n < b.ep.novel_labels.size(); ++n) {
    const std::size_t cls = b.ep.novel_labels[n];
    const ClassRecord& c = b.ds.cls(cls);
    const auto available = c.rows(portion);
    if (available.size() < cfg.k_shot + cfg.novel_queries) {
      throw SamplingError("class '" + c.id + "' has " + std::to_string(available.size()) +
                          " instances, needs K+Q = " +
                          std::to_string(cfg.k_shot + cfg.novel_queries));
    }
    const auto support = draw_rows(c, available, cfg.k_shot, "support", rng);
    std::vector<std::size_t> rest;
    for (std::size_t r : available) {
      if (std::find(support.begin(), support.end(), r) == support.end()) rest.push_back(r);
    }
    for (std::size_t r : support) b.add_support(cls, r);
    novel_queries.emplace_back(n, draw_rows(c, rest, cfg.novel_queries, "novel queries", rng));
  }
  for (const auto& [n, rows] : novel_queries) {
    for (std::size_t r : rows) b.add_query(b.ep.novel_labels[n], r, n_seen + n);
  }
}

void sample_seen_queries(Builder& b, const EpisodeConfig& cfg, Portion portion, Rng& rng) {
  for (std::size_t s = 0; s < b.ep.seen_labels.size(); ++s) {
    const std::size_t cls = b.ep.seen_labels[s];
    const ClassRecord& c = b.ds.cls(cls);
    for (std::size_t r : draw_rows(c, c.rows(portion), cfg.seen_queries, "seen queries", rng)) {
      b.add_query(cls, r, s);
    }
  }
}

void check_config(const EpisodeConfig& cfg) {
  if (cfg.n_way == 0) throw SamplingError("episode needs at least one novel class");
  if (cfg.k_shot == 0) throw SamplingError("episode needs K >= 1 support instances");
}

}  // namespace

Episode sample_train_episode(const Dataset& ds, const EpisodeConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  const auto train = ds.classes_in(Split::train);
  if (train.size() < cfg.n_way + 1) {
    throw SamplingError("training episodes need at least N+1 = " + std::to_string(cfg.n_way + 1) +
                        " train classes, dataset has " + std::to_string(train.size()));
  }
  Rng rng(seed);
  Builder b{ds, {}, {}, {}};
  b.ep.seed = seed;
  b.ep.shot_count = cfg.k_shot;

  const auto picks = random_sample(train.size(), cfg.n_way, rng);
  std::vector<bool> is_novel(train.size(), false);
  for (std::size_t p : picks) {
    is_novel[p] = true;
    b.ep.novel_labels.push_back(train[p]);
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!is_novel[i]) b.ep.seen_labels.push_back(train[i]);
  }
  sample_novel_block(b, cfg, Portion::train, rng);
  sample_seen_queries(b, cfg, Portion::train, rng);
  return b.finish();
}

Episode sample_test_episode(const Dataset& ds, NovelPool pool, const EpisodeConfig& cfg,
                            std::uint64_t seed) {
  check_config(cfg);
  const auto novel = ds.classes_in(pool == NovelPool::novel_val ? Split::novel_val : Split::novel_test);
  if (novel.size() < cfg.n_way) {
    throw SamplingError("novel pool has " + std::to_string(novel.size()) + " classes, needs N = " +
                        std::to_string(cfg.n_way));
  }
  Rng rng(seed);
  Builder b{ds, {}, {}, {}};
  b.ep.seed = seed;
  b.ep.shot_count = cfg.k_shot;
  b.ep.seen_labels = ds.classes_in(Split::train);
  for (std::size_t p : random_sample(novel.size(), cfg.n_way, rng)) b.ep.novel_labels.push_back(novel[p]);

  sample_novel_block(b, cfg, Portion::train, rng);
  sample_seen_queries(b, cfg, pool == NovelPool::novel_val ? Portion::val : Portion::test, rng);
  return b.finish();
}

}  // namespace gcgpn
