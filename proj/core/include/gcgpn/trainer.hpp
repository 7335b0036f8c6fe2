#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gcgpn/dataset.hpp"
#include "gcgpn/episode.hpp"
#include "gcgpn/eval.hpp"
#include "gcgpn/model.hpp"

namespace gcgpn {

enum class Objective { gfsl, fsl };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t episodes_per_epoch = 200;
  double lr_init = 0.1;
  std::vector<std::size_t> lr_milestones;  // 1-based epochs after which lr decays
  double lr_decay_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  Objective objective = Objective::gfsl;
  EpisodeConfig episode;
  std::size_t val_episodes = 100;  // 0 disables validation
  Measure monitor = Measure::h_mean;
  std::size_t patience = 0;  // epochs without improvement before stopping; 0 never stops early
  std::uint64_t seed = 0;
  std::size_t val_threads = 1;
};

// Throws ConfigError on unsorted or out-of-range milestones and similar.
void validate(const TrainConfig& cfg);

// lr in effect during 1-based epoch e.
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_metric = 0.0;  // NaN when validation is disabled
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when the initial model was kept
  double best_metric = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Episodic SGD. With validation enabled the best snapshot is restored at the
// end. The fsl objective is only accepted for the pn_plus special case; its
// seen prototypes are then taken from training-class feature means.
TrainResult train(Model& m, const Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Monitor metric over fixed-seed novel_val episodes.
double validate(const Model& m, const Dataset& ds, std::size_t n_episodes, std::uint64_t seed,
                const EpisodeConfig& episode = {}, Measure monitor = Measure::h_mean, std::size_t threads = 1);

std::map<std::string, std::string> to_key_values(const TrainConfig& cfg);

// epoch,lr,train_loss,val_metric
void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace gcgpn
