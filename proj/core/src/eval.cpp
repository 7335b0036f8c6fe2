#include "gcgpn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "gcgpn/errors.hpp"
#include "gcgpn/random.hpp"
#include "text_util.hpp"

namespace gcgpn {

std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::seen_seen: return "seen_seen";
    case Measure::novel_novel: return "novel_novel";
    case Measure::joint_joint: return "joint_joint";
    case Measure::seen_joint: return "seen_joint";
    case Measure::novel_joint: return "novel_joint";
    case Measure::h_mean: return "h_mean";
  }
  return "h_mean";
}

Measure parse_measure(std::string_view s) {
  for (Measure m : kAllMeasures) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown measure '" + std::string(s) + "'");
}

double harmonic_mean(double x1, double x2) {
  if (x1 < 0.0 || x2 < 0.0) throw Error("harmonic_mean needs non-negative inputs");
  const double s = x1 + x2;
  return s == 0.0 ? 0.0 : 2.0 * x1 * x2 / s;
}

namespace {

std::size_t argmax(std::span<const double> row, std::size_t begin, std::size_t end) {
  std::size_t best = begin;
  for (std::size_t j = begin + 1; j < end; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::size_t at(Measure m) { return static_cast<std::size_t>(m); }

}  // namespace

EpisodeMetrics episode_metrics(const Matrix& scores, const Episode& ep) {
  const std::size_t n_seen = ep.num_seen();
  const std::size_t n_joint = ep.num_joint();
  if (scores.rows() != ep.num_queries() || scores.cols() != n_joint) {
    throw ShapeError("scores " + shape_string(scores) + " do not match episode with " +
                     std::to_string(ep.num_queries()) + " queries and " + std::to_string(n_joint) + " classes");
  }
  std::size_t seen_q = 0, novel_q = 0, ss = 0, nn = 0, sj = 0, nj = 0;
  for (std::size_t q = 0; q < ep.num_queries(); ++q) {
    const auto row = scores.row(q);
    const std::size_t label = ep.query_labels[q];
    const bool joint_hit = argmax(row, 0, n_joint) == label;
    if (label < n_seen) {
      ++seen_q;
      ss += argmax(row, 0, n_seen) == label;
      sj += joint_hit;
    } else {
      ++novel_q;
      nn += argmax(row, n_seen, n_joint) == label;
      nj += joint_hit;
    }
  }
  if (seen_q == 0 || novel_q == 0) {
    throw SamplingError("episode needs both seen and novel queries for the joint measures (seen=" +
                        std::to_string(seen_q) + ", novel=" + std::to_string(novel_q) + ")");
  }
  EpisodeMetrics m{};
  m[at(Measure::seen_seen)] = 100.0 * double(ss) / double(seen_q);
  m[at(Measure::novel_novel)] = 100.0 * double(nn) / double(novel_q);
  m[at(Measure::joint_joint)] = 100.0 * double(sj + nj) / double(seen_q + novel_q);
  m[at(Measure::seen_joint)] = 100.0 * double(sj) / double(seen_q);
  m[at(Measure::novel_joint)] = 100.0 * double(nj) / double(novel_q);
  m[at(Measure::h_mean)] = harmonic_mean(m[at(Measure::seen_joint)], m[at(Measure::novel_joint)]);
  return m;
}

EpisodeMetrics episode_metrics(const Model& m, const Episode& ep) {
  return episode_metrics(predict_probabilities(m, ep), ep);
}

MetricsReport aggregate(std::vector<EpisodeMetrics> per_episode) {
  MetricsReport r;
  r.n_episodes = per_episode.size();
  if (r.n_episodes == 0) throw Error("cannot aggregate zero episodes");
  const double n = double(r.n_episodes);
  for (std::size_t k = 0; k < kNumMeasures; ++k) {
    double sum = 0.0;
    for (const auto& e : per_episode) sum += e[k];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& e : per_episode) ss += (e[k] - mean) * (e[k] - mean);
    const double sd = r.n_episodes > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    r.measures[k] = {mean, 1.96 * sd / std::sqrt(n)};
  }
  r.per_episode = std::move(per_episode);
  return r;
}

bool jensen_holds(const MetricsReport& r, double slack) {
  return r[Measure::h_mean].mean <=
         harmonic_mean(r[Measure::seen_joint].mean, r[Measure::novel_joint].mean) + slack;
}

Scorer model_scorer(const Model& m) {
  return [&m](const Episode& ep) { return predict_probabilities(m, ep); };
}

Scorer chance_scorer() {
  return [](const Episode& ep) {
    Rng rng(derive_seed(ep.seed, 0x636861));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix s(ep.num_queries(), ep.num_joint());
    for (double& v : s.data()) v = u(rng);
    return s;
  };
}

MetricsReport evaluate(const Scorer& scorer, const Dataset& ds, const EvalConfig& cfg) {
  if (cfg.n_episodes == 0) throw ConfigError("eval needs at least one episode");
  std::vector<EpisodeMetrics> results(cfg.n_episodes);
  auto run = [&](std::size_t i) {
    const Episode ep = sample_test_episode(ds, cfg.pool, cfg.episode, derive_seed(cfg.seed, i));
    results[i] = episode_metrics(scorer(ep), ep);
  };

  std::size_t threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  threads = std::min(threads, cfg.n_episodes);
  if (threads <= 1) {
    for (std::size_t i = 0; i < cfg.n_episodes; ++i) run(i);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < cfg.n_episodes; i += threads) run(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  MetricsReport r = aggregate(std::move(results));
  r.config = to_key_values(cfg);
  return r;
}

MetricsReport evaluate(const Model& m, const Dataset& ds, const EvalConfig& cfg) {
  MetricsReport r = evaluate(model_scorer(m), ds, cfg);
  for (const auto& [k, v] : to_key_values(m.config())) r.config["model." + k] = v;
  return r;
}

std::map<std::string, std::string> to_key_values(const EvalConfig& cfg) {
  return {{"pool", cfg.pool == NovelPool::novel_val ? "novel_val" : "novel_test"},
          {"n_way", std::to_string(cfg.episode.n_way)},
          {"k_shot", std::to_string(cfg.episode.k_shot)},
          {"novel_queries", std::to_string(cfg.episode.novel_queries)},
          {"seen_queries", std::to_string(cfg.episode.seen_queries)},
          {"n_episodes", std::to_string(cfg.n_episodes)},
          {"seed", std::to_string(cfg.seed)}};
}

std::vector<KSweepRow> k_sweep(const std::function<Model(std::size_t)>& factory, const Dataset& ds,
                               const std::vector<std::size_t>& ks, EvalConfig cfg) {
  std::vector<KSweepRow> rows;
  for (std::size_t k : ks) {
    if (k == 0) throw ConfigError("k_sweep: K must be positive");
    const Model m = factory(k);
    cfg.episode.k_shot = k;
    rows.push_back({k, evaluate(m, ds, cfg)});
  }
  return rows;
}

void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "name,mean,ci95\n";
  for (Measure m : kAllMeasures) {
    out << to_string(m) << ',' << detail::format_double(r[m].mean) << ',' << detail::format_double(r[m].ci95)
        << '\n';
  }
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

void write_summary_json(const MetricsReport& r, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["n_episodes"] = r.n_episodes;
  for (Measure m : kAllMeasures) {
    j["measures"][std::string(to_string(m))] = {{"mean", r[m].mean}, {"ci95", r[m].ci95}};
  }
  j["jensen_holds"] = jensen_holds(r);
  j["config"] = r.config;
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace gcgpn
