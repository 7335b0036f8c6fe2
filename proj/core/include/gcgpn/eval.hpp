#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gcgpn/dataset.hpp"
#include "gcgpn/episode.hpp"
#include "gcgpn/matrix.hpp"
#include "gcgpn/model.hpp"

namespace gcgpn {

enum class Measure { seen_seen, novel_novel, joint_joint, seen_joint, novel_joint, h_mean };
inline constexpr std::size_t kNumMeasures = 6;
inline constexpr std::array<Measure, kNumMeasures> kAllMeasures{
    Measure::seen_seen,  Measure::novel_novel, Measure::joint_joint,
    Measure::seen_joint, Measure::novel_joint, Measure::h_mean};

std::string_view to_string(Measure m);
Measure parse_measure(std::string_view s);

// 2ab/(a+b); 0 when both are 0.
double harmonic_mean(double x1, double x2);

// Percent accuracies for one episode, indexed by Measure.
using EpisodeMetrics = std::array<double, kNumMeasures>;

// `scores` is queries x joint classes (seen columns first); any monotone
// score works, argmax ties go to the lowest column. Throws when the episode
// lacks seen or novel queries.
EpisodeMetrics episode_metrics(const Matrix& scores, const Episode& ep);
EpisodeMetrics episode_metrics(const Model& m, const Episode& ep);

struct MeasureStat {
  double mean = 0.0;
  double ci95 = 0.0;  // 1.96 sd / sqrt(n)
  friend bool operator==(const MeasureStat&, const MeasureStat&) = default;
};

struct MetricsReport {
  std::array<MeasureStat, kNumMeasures> measures{};
  std::size_t n_episodes = 0;
  std::vector<EpisodeMetrics> per_episode;
  std::map<std::string, std::string> config;

  const MeasureStat& operator[](Measure m) const { return measures[static_cast<std::size_t>(m)]; }
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport aggregate(std::vector<EpisodeMetrics> per_episode);

// Mean per-episode H-mean never exceeds H of the mean Seen-Joint and
// Novel-Joint accuracies.
bool jensen_holds(const MetricsReport& r, double slack = 1e-9);

// Produces queries x joint scores for an episode. Must be safe to call
// concurrently.
using Scorer = std::function<Matrix(const Episode&)>;

Scorer model_scorer(const Model& m);
// Uniform random scores drawn from an rng seeded by the episode seed.
Scorer chance_scorer();

struct EvalConfig {
  NovelPool pool = NovelPool::novel_test;
  EpisodeConfig episode{5, 1, 15, 1};
  std::size_t n_episodes = 600;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // 0 picks hardware concurrency
};

// Episode i uses derive_seed(cfg.seed, i); the report does not depend on
// the thread count.
MetricsReport evaluate(const Scorer& scorer, const Dataset& ds, const EvalConfig& cfg);
MetricsReport evaluate(const Model& m, const Dataset& ds, const EvalConfig& cfg);

std::map<std::string, std::string> to_key_values(const EvalConfig& cfg);

struct KSweepRow {
  std::size_t k_shot = 0;
  MetricsReport report;
};

// Builds (typically trains) one model per K and evaluates it with K shots.
std::vector<KSweepRow> k_sweep(const std::function<Model(std::size_t)>& factory, const Dataset& ds,
                               const std::vector<std::size_t>& ks, EvalConfig cfg);

// name,mean,ci95 with one row per measure.
void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& path);
// Means, CIs, episode count and the config echo.
void write_summary_json(const MetricsReport& r, const std::filesystem::path& path);

}  // namespace gcgpn
