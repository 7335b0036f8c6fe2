#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli/commands.hpp"
#include "fixtures.hpp"
#include "gcgpn/errors.hpp"
#include "gcgpn/presets.hpp"

namespace gcgpn::cli {
namespace {

std::size_t data_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A run small enough for unit tests.
RunConfig quick(const std::string& name) {
  RunConfig c;
  c.out = fixtures::scratch_dir(name);
  c.synth = fixtures::small_spec();
  c.model.d = 6;
  c.train.epochs = 2;
  c.train.episodes_per_epoch = 10;
  c.train.val_episodes = 5;
  c.train.episode = {3, 1, 3, 1};
  c.eval.n_episodes = 20;
  c.eval.episode.novel_queries = 3;
  return c;
}

TEST(RunConfig, DefaultsCoverEveryVariant) {
  const RunConfig c;
  EXPECT_EQ(c.variant, "gcgpn-aux");
  EXPECT_EQ(c.ablate_variants.size(), 10u);
  EXPECT_EQ(c.grad_variants, preset_names());
  EXPECT_EQ(c.eval.n_episodes, 600u);
  EXPECT_EQ(c.k_values, (std::vector<std::size_t>{1, 5}));
}

TEST(RunConfig, UnknownKeyIsNamed) {
  try {
    parse_run_config("[train]\nepochs = 3\nepochz = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.epochz"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_run_config("[trian]\nepochs = 3\n"), ConfigError);
  EXPECT_THROW(parse_run_config("seed = 3\n"), ConfigError);
}

TEST(RunConfig, BadValueNamesKey) {
  for (const char* text : {"[train]\nepochs = ten\n", "[model]\nvariant = gcgpn-nope\n", "[model]\nrho = tanh\n",
                           "[eval]\npool = novel_train\n", "[operator]\nshuffle = maybe\n"}) {
    EXPECT_THROW(parse_run_config(text), Error) << text;
  }
  try {
    parse_run_config("[synth]\nnoise_scale = loud\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("synth.noise_scale"), std::string::npos);
  }
}

TEST(RunConfig, FileValuesOverrideDefaults) {
  const RunConfig c = parse_run_config(
      "[run]\nseed = 42\n[train]\nlr_milestones = 3, 6\nobjective = fsl\n[model]\nvariant = pn_plus\nhidden = 8,4\n"
      "[ablate]\nvariants = pn_plus,gcgpn\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.lr_milestones, (std::vector<std::size_t>{3, 6}));
  EXPECT_EQ(c.train.objective, Objective::fsl);
  EXPECT_EQ(c.variant, "pn_plus");
  EXPECT_EQ(c.model.hidden, (std::vector<std::size_t>{8, 4}));
  EXPECT_EQ(c.ablate_variants, (std::vector<std::string>{"pn_plus", "gcgpn"}));
}

TEST(RunConfig, RenderRoundTrips) {
  RunConfig c;
  c.seed = 7;
  c.synth.noise_scale = 0.123456789;
  c.model.operators = apply_preset("gcgpn-aux-split", c.model).operators;
  c.variant = "custom";
  c.train.lr_milestones = {2, 4};
  c.shuffle_operator = true;
  c.eval.pool = NovelPool::novel_val;
  const std::string text = render(c);
  const RunConfig back = parse_run_config(text);
  EXPECT_EQ(render(back), text);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.synth.noise_scale, 0.123456789);
}

TEST(RunConfig, SeedsAreDistinct) {
  RunConfig c;
  c.seed = 3;
  EXPECT_NE(model_seed(c), train_seed(c));
  EXPECT_NE(train_seed(c), eval_seed(c));
  EXPECT_NE(eval_seed(c), shuffle_seed(c));
}

TEST(Commands, TrainThenEvalPnPlusWritesSixMeasures) {
  RunConfig c = quick("cli_eval");
  c.variant = "pn_plus";
  std::ostringstream log;
  ASSERT_EQ(cmd_train(c, "[model]\nvariant = pn_plus\n", log), 0);
  EXPECT_TRUE(std::filesystem::exists(c.out / "model.ckpt"));
  EXPECT_EQ(data_lines(c.out / "history.csv"), 3u);
  ASSERT_EQ(cmd_eval(c, "[model]\nvariant = pn_plus\n", log), 0);
  EXPECT_EQ(data_lines(c.out / "metrics.csv"), 7u);
  EXPECT_TRUE(std::filesystem::exists(c.out / "summary.json"));
  EXPECT_EQ(slurp(c.out / "config.ini"), "[model]\nvariant = pn_plus\n");
  EXPECT_EQ(render(load_run_config(c.out / "resolved_config.ini")), render(c));
}

TEST(Commands, EvalIsReproducibleFromResolvedConfig) {
  RunConfig c = quick("cli_repro");
  c.variant = "pn_plus";
  std::ostringstream log;
  ASSERT_EQ(cmd_train(c, "", log), 0);
  ASSERT_EQ(cmd_eval(c, "", log), 0);
  const std::string first = slurp(c.out / "metrics.csv");
  RunConfig again = load_run_config(c.out / "resolved_config.ini");
  ASSERT_EQ(cmd_train(again, "", log), 0);
  ASSERT_EQ(cmd_eval(again, "", log), 0);
  EXPECT_EQ(slurp(c.out / "metrics.csv"), first);
}

TEST(Commands, AblateTwoVariantsGivesTwoRows) {
  RunConfig c = quick("cli_ablate");
  c.ablate_variants = {"pn_plus", "gcgpn-aux"};
  std::ostringstream log;
  ASSERT_EQ(cmd_ablate(c, "", log), 0);
  EXPECT_EQ(data_lines(c.out / "ablation.csv"), 3u);
  const std::string table = slurp(c.out / "ablation.csv");
  EXPECT_NE(table.find("\npn_plus,"), std::string::npos);
  EXPECT_NE(table.find("\ngcgpn-aux,"), std::string::npos);
}

TEST(Commands, SweepKOneRowPerK) {
  RunConfig c = quick("cli_sweep");
  c.variant = "pn_plus";
  c.k_values = {1, 2};
  std::ostringstream log;
  ASSERT_EQ(cmd_sweep_k(c, "", log), 0);
  EXPECT_EQ(data_lines(c.out / "k_sweep.csv"), 3u);
}

TEST(Commands, GradcheckDefaultPasses) {
  RunConfig c;
  c.out = fixtures::scratch_dir("cli_gradcheck");
  std::ostringstream log;
  EXPECT_EQ(cmd_gradcheck(c, "", log), 0) << log.str();
  EXPECT_NE(log.str().find("max rel error"), std::string::npos);
  EXPECT_EQ(data_lines(c.out / "gradcheck.csv"), preset_names().size() + 1);
}

TEST(Commands, GradcheckFailsOnImpossibleTolerance) {
  RunConfig c;
  c.out = fixtures::scratch_dir("cli_gradcheck_tight");
  c.grad_variants = {"gcgpn-aux"};
  c.grad_tolerance = 0.0;
  std::ostringstream log;
  EXPECT_EQ(cmd_gradcheck(c, "", log), 1);
}

TEST(Commands, SynthAndOperatorRoundTrip) {
  RunConfig c = quick("cli_synth");
  std::ostringstream log;
  ASSERT_EQ(cmd_synth(c, "", log), 0);
  ASSERT_EQ(cmd_build_operator(c, "", log), 0);
  RunConfig from_disk = c;
  from_disk.dataset = (c.out / "dataset").string();
  from_disk.similarity = (c.out / "similarity.csv").string();
  const Dataset ds = load_data(from_disk);
  EXPECT_TRUE(ds == load_data(c));
  EXPECT_EQ(build_similarity(from_disk, ds).values().rows(), ds.num_classes());
}

TEST(Commands, ShuffledOperatorIsAPermutation) {
  RunConfig c = quick("cli_shuffle");
  const Dataset ds = load_data(c);
  const Matrix plain = build_similarity(c, ds).values();
  c.shuffle_operator = true;
  const Matrix shuffled = build_similarity(c, ds).values();
  EXPECT_FALSE(plain == shuffled);
  std::vector<double> a(plain.data().begin(), plain.data().end()), b(shuffled.data().begin(), shuffled.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Commands, MissingCheckpointFails) {
  RunConfig c = quick("cli_missing");
  c.checkpoint = (c.out / "nope.ckpt").string();
  std::ostringstream log;
  EXPECT_THROW(cmd_eval(c, "", log), Error);
}

}  // namespace
}  // namespace gcgpn::cli
