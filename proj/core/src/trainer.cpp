#include "gcgpn/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "gcgpn/errors.hpp"
#include "gcgpn/optim.hpp"
#include "gcgpn/random.hpp"
#include "gcgpn/tape.hpp"
#include "text_util.hpp"

namespace gcgpn {

std::string_view to_string(Objective o) { return o == Objective::fsl ? "fsl" : "gfsl"; }

Objective parse_objective(std::string_view s) {
  if (s == "gfsl") return Objective::gfsl;
  if (s == "fsl") return Objective::fsl;
  throw ConfigError("unknown objective '" + std::string(s) + "'");
}

void validate(const TrainConfig& cfg) {
  for (std::size_t i = 0; i < cfg.lr_milestones.size(); ++i) {
    const std::size_t m = cfg.lr_milestones[i];
    if (m < 1 || m > cfg.epochs) {
      throw ConfigError("lr milestone " + std::to_string(m) + " outside [1, " + std::to_string(cfg.epochs) + "]");
    }
    if (i > 0 && m <= cfg.lr_milestones[i - 1]) throw ConfigError("lr milestones must be strictly increasing");
  }
  if (!(cfg.lr_init > 0.0)) throw ConfigError("lr_init must be positive");
  if (!(cfg.lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be positive");
  if (cfg.momentum < 0.0 || cfg.weight_decay < 0.0) throw ConfigError("momentum and weight_decay must be >= 0");
  if (cfg.episodes_per_epoch == 0 && cfg.epochs > 0) throw ConfigError("episodes_per_epoch must be positive");
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.lr_init;
  for (std::size_t m : cfg.lr_milestones) {
    if (m < epoch) lr *= cfg.lr_decay_factor;
  }
  return lr;
}

double validate(const Model& m, const Dataset& ds, std::size_t n_episodes, std::uint64_t seed,
                const EpisodeConfig& episode, Measure monitor, std::size_t threads) {
  EvalConfig cfg;
  cfg.pool = NovelPool::novel_val;
  cfg.episode = episode;
  cfg.n_episodes = n_episodes;
  cfg.seed = seed;
  cfg.threads = threads;
  return evaluate(model_scorer(m), ds, cfg)[monitor].mean;
}

namespace {

std::vector<Matrix> snapshot(const Model& m) {
  std::vector<Matrix> out;
  for (const Parameter* p : m.parameters()) out.push_back(p->value);
  return out;
}

void restore(Model& m, const std::vector<Matrix>& values) {
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

constexpr std::uint64_t kValidationStream = 0x76616c;

}  // namespace

TrainResult train(Model& m, const Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  const bool fsl = cfg.objective == Objective::fsl;
  if (fsl && m.config().special_case != SpecialCase::pn_plus) {
    throw ConfigError("the fsl objective is only available for the pn_plus configuration");
  }
  const bool validating = cfg.val_episodes > 0;
  const std::uint64_t val_seed = derive_seed(cfg.seed, kValidationStream);

  TrainResult result;
  result.best_metric = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> best;
  if (validating) {
    if (fsl) set_prototypes_from_data(m, ds);
    result.best_metric = validate(m, ds, cfg.val_episodes, val_seed, cfg.episode, cfg.monitor, cfg.val_threads);
    best = snapshot(m);
  }

  auto params = m.parameters();
  for (Parameter* p : params) {
    p->zero_grad();
    p->reset_momentum();
  }
  std::size_t since_best = 0;
  std::uint64_t episode_index = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const SgdOptions opts{learning_rate(cfg, epoch), cfg.momentum, cfg.weight_decay};
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < cfg.episodes_per_epoch; ++i, ++episode_index) {
      const std::uint64_t seed = derive_seed(cfg.seed, episode_index);
      const Episode ep = sample_train_episode(ds, cfg.episode, seed);
      Tape tape;
      const ForwardResult fr = fsl ? forward_fsl(m, ep, tape) : forward_episode(m, ep, tape);
      if (!fr.loss.valid()) throw TrainingError("episode " + std::to_string(seed) + " has no queries");
      const double loss = fr.loss.value().item();
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss " + detail::format_double(loss) + " at epoch " + std::to_string(epoch) +
                            ", episode seed " + std::to_string(seed));
      }
      loss_sum += loss;
      zero_grad(params);
      tape.backward(fr.loss);
      sgd_step(params, opts);
    }

    EpochRecord rec{epoch, opts.lr, loss_sum / double(cfg.episodes_per_epoch),
                    std::numeric_limits<double>::quiet_NaN()};
    if (validating) {
      if (fsl) set_prototypes_from_data(m, ds);
      rec.val_metric = validate(m, ds, cfg.val_episodes, val_seed, cfg.episode, cfg.monitor, cfg.val_threads);
      if (rec.val_metric > result.best_metric) {
        result.best_metric = rec.val_metric;
        result.best_epoch = epoch;
        best = snapshot(m);
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (validating && cfg.patience > 0 && since_best >= cfg.patience && epoch < cfg.epochs) {
      result.stopped_early = true;
      break;
    }
  }

  if (validating) {
    restore(m, best);
  } else {
    result.best_epoch = cfg.epochs;
    result.best_metric = std::numeric_limits<double>::quiet_NaN();
  }
  if (fsl) set_prototypes_from_data(m, ds);
  for (Parameter* p : params) {
    p->zero_grad();
    p->reset_momentum();
  }
  return result;
}

std::map<std::string, std::string> to_key_values(const TrainConfig& cfg) {
  std::string milestones;
  for (std::size_t i = 0; i < cfg.lr_milestones.size(); ++i) {
    if (i) milestones += ',';
    milestones += std::to_string(cfg.lr_milestones[i]);
  }
  return {{"epochs", std::to_string(cfg.epochs)},
          {"episodes_per_epoch", std::to_string(cfg.episodes_per_epoch)},
          {"lr_init", detail::format_double(cfg.lr_init)},
          {"lr_milestones", milestones},
          {"lr_decay_factor", detail::format_double(cfg.lr_decay_factor)},
          {"momentum", detail::format_double(cfg.momentum)},
          {"weight_decay", detail::format_double(cfg.weight_decay)},
          {"objective", std::string(to_string(cfg.objective))},
          {"val_episodes", std::to_string(cfg.val_episodes)},
          {"monitor", std::string(to_string(cfg.monitor))},
          {"patience", std::to_string(cfg.patience)},
          {"seed", std::to_string(cfg.seed)}};
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "epoch,lr,train_loss,val_metric\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << detail::format_double(r.lr) << ',' << detail::format_double(r.train_loss) << ','
        << (std::isnan(r.val_metric) ? std::string("nan") : detail::format_double(r.val_metric)) << '\n';
  }
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace gcgpn
