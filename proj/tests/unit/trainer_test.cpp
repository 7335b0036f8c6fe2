#include <gtest/gtest.h>

#include <fstream>

#include "gcgpn/errors.hpp"
#include "gcgpn/optim.hpp"
#include "gcgpn/presets.hpp"
#include "gcgpn/trainer.hpp"
#include "fixtures.hpp"

using namespace gcgpn;

namespace {

TrainConfig quick(std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.episodes_per_epoch = 10;
  cfg.episode = {3, 1, 3, 1};
  cfg.val_episodes = 10;
  cfg.seed = seed;
  return cfg;
}

std::vector<Matrix> values(const Model& m) {
  std::vector<Matrix> out;
  for (const Parameter* p : m.parameters()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST(LrSchedule, StepDecayAfterMilestones) {
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.lr_milestones = {2, 4};
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 1), 0.1);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 2), 0.1);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 3), 0.1 * 0.1);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 5), 0.1 * 0.1 * 0.1);
  cfg.lr_decay_factor = 1.0;
  cfg.lr_milestones.clear();
  for (std::size_t e = 1; e <= 6; ++e) EXPECT_EQ(learning_rate(cfg, e), 0.1);
}

TEST(LrSchedule, HistoryRecordsSchedule) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  Model m = make_model(apply_preset("gcgpn-aux", {}), ds, 1);
  TrainConfig cfg = quick();
  cfg.epochs = 4;
  cfg.episodes_per_epoch = 2;
  cfg.lr_milestones = {1, 3};
  cfg.lr_decay_factor = 0.5;
  const auto r = train(m, ds, cfg);
  ASSERT_EQ(r.history.size(), 4u);
  for (const auto& rec : r.history) EXPECT_DOUBLE_EQ(rec.lr, learning_rate(cfg, rec.epoch));
  EXPECT_DOUBLE_EQ(r.history[1].lr, 0.05);
  EXPECT_DOUBLE_EQ(r.history[3].lr, 0.025);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.lr_milestones = {3, 2};
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.lr_milestones = {0};
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.lr_milestones = {6};
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.lr_milestones = {1, 5};
  EXPECT_NO_THROW(validate(cfg));
}

TEST(Train, FslOnlyForPnPlus) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  Model m = make_model(apply_preset("gcgpn-aux", {}), ds, 1);
  TrainConfig cfg = quick();
  cfg.objective = Objective::fsl;
  EXPECT_THROW(train(m, ds, cfg), ConfigError);
  Model pn = make_model(apply_preset("pn_plus", {}), ds, 1);
  EXPECT_NO_THROW(train(pn, ds, cfg));
}

TEST(Train, ZeroEpochsKeepsInitialization) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  Model m = make_model(apply_preset("gcgpn-aux", {}), ds, 1);
  const auto before = values(m);
  TrainConfig cfg = quick();
  cfg.epochs = 0;
  const auto r = train(m, ds, cfg);
  EXPECT_TRUE(r.history.empty());
  EXPECT_TRUE(values(m) == before);
}

TEST(Train, BitReproducible) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(2));
  Model a = make_model(apply_preset("gcgpn-aux-split", {}), ds, 5);
  Model b = make_model(apply_preset("gcgpn-aux-split", {}), ds, 5);
  const auto ra = train(a, ds, quick(9));
  const auto rb = train(b, ds, quick(9));
  EXPECT_TRUE(values(a) == values(b));
  ASSERT_EQ(ra.history.size(), rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) EXPECT_EQ(ra.history[i].train_loss, rb.history[i].train_loss);
}

TEST(Train, BestSnapshotIsRestored) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(3));
  Model m = make_model(apply_preset("gcgpn-aux", {}), ds, 2);
  TrainConfig cfg = quick(4);
  cfg.epochs = 4;
  const auto r = train(m, ds, cfg);
  const double again = validate(m, ds, cfg.val_episodes, derive_seed(cfg.seed, 0x76616c), cfg.episode);
  EXPECT_DOUBLE_EQ(again, r.best_metric);
  for (const auto& rec : r.history) EXPECT_LE(rec.val_metric, r.best_metric);
}

TEST(Train, PatienceStopsAtEpochBoundary) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(3));
  Model m = make_model(apply_preset("gcgpn-aux", {}), ds, 2);
  TrainConfig cfg = quick();
  cfg.epochs = 5;
  cfg.lr_init = 1e-300;  // parameters effectively frozen, metric never improves
  cfg.patience = 2;
  const auto r = train(m, ds, cfg);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.best_epoch, 0u);
}

TEST(Train, NonFiniteLossNamesEpisodeSeed) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  Model m = make_model(apply_preset("pn_plus", {}), ds, 1);
  m.tau.value = Matrix::scalar(1000.0);
  TrainConfig cfg = quick(3);
  cfg.val_episodes = 0;
  try {
    train(m, ds, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("episode seed " + std::to_string(derive_seed(3, 0))), std::string::npos) << msg;
  }
}

TEST(Train, OverfitsOneEpisode) {
  auto spec = fixtures::small_spec(7);
  spec.noise_scale = 1.0;
  const Dataset ds = generate_synthetic(spec);
  ModelConfig base;
  base.d = 8;
  Model m = make_model(apply_preset("gcgpn-aux", base), ds, 3);
  const Episode ep = sample_train_episode(ds, {3, 1, 3, 2}, 5);
  auto params = m.parameters();
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    Tape t;
    const ForwardResult fr = forward_episode(m, ep, t);
    last = fr.loss.value().item();
    if (step == 0) first = last;
    zero_grad(params);
    t.backward(fr.loss);
    sgd_step(params, {0.1, 0.9, 0.0});
  }
  EXPECT_LE(last, 0.1 * first) << first << " -> " << last;
  const Matrix p = predict_probabilities(m, ep);
  for (std::size_t q = 0; q < ep.num_queries(); ++q) {
    const auto row = p.row(q);
    EXPECT_EQ(std::size_t(std::max_element(row.begin(), row.end()) - row.begin()), ep.query_labels[q]);
  }
}

TEST(Train, FslPrototypesComeFromData) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(1));
  Model m = make_model(apply_preset("pn_plus", {}), ds, 1);
  TrainConfig cfg = quick();
  cfg.objective = Objective::fsl;
  train(m, ds, cfg);
  Model copy = m;
  set_prototypes_from_data(copy, ds);
  EXPECT_TRUE(copy.seen_prototypes.value == m.seen_prototypes.value);
}

TEST(Train, HistoryCsv) {
  const auto dir = fixtures::scratch_dir("history");
  write_history_csv({{1, 0.1, 2.5, 40.0}, {2, 0.01, 2.0, std::nan("")}}, dir / "history.csv");
  std::ifstream in(dir / "history.csv");
  std::string a, b, c;
  std::getline(in, a);
  std::getline(in, b);
  std::getline(in, c);
  EXPECT_EQ(a, "epoch,lr,train_loss,val_metric");
  EXPECT_EQ(b, "1,0.1,2.5,40");
  EXPECT_EQ(c, "2,0.01,2,nan");
}
