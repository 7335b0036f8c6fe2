#include "cli/commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "gcgpn/checkpoint.hpp"
#include "gcgpn/errors.hpp"
#include "gcgpn/gradcheck.hpp"
#include "gcgpn/presets.hpp"
#include "gcgpn/random.hpp"

namespace gcgpn::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

void echo_config(const RunConfig& cfg, const std::string& config_text) {
  fs::create_directories(cfg.out);
  write_text(cfg.out / "config.ini", config_text);
  write_text(cfg.out / "resolved_config.ini", render(cfg));
}

std::size_t count_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("artifact '" + path.string() + "' missing");
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

void expect_rows(const fs::path& path, std::size_t rows) {
  const std::size_t n = count_lines(path);
  if (n != rows + 1) {
    throw Error("artifact '" + path.string() + "' has " + std::to_string(n) + " lines, expected " +
                std::to_string(rows + 1));
  }
}

bool needs_semantic(const ModelConfig& mc) {
  for (const auto& op : mc.operators) {
    if (is_semantic(op.kind)) return true;
  }
  return false;
}

Model build_model(const RunConfig& cfg, const Dataset& ds, const std::string& variant) {
  const ModelConfig mc = resolve_model(cfg, variant);
  Matrix semantic;
  if (needs_semantic(mc)) semantic = build_similarity(cfg, ds).resolve(ds.class_ids());
  return make_model(mc, ds, model_seed(cfg), std::move(semantic));
}

Model train_variant(const RunConfig& cfg, const Dataset& ds, const std::string& variant, std::ostream& log,
                    TrainResult* result = nullptr) {
  Model m = build_model(cfg, ds, variant);
  const TrainResult r = train(m, ds, resolve_train(cfg), [&](const EpochRecord& e) {
    log << variant << " epoch " << e.epoch << " lr " << e.lr << " loss " << e.train_loss << " val "
        << e.val_metric << '\n';
  });
  if (result != nullptr) *result = r;
  return m;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void print_report(const MetricsReport& r, std::ostream& log) {
  for (Measure m : kAllMeasures) {
    log << std::left << std::setw(12) << to_string(m) << std::right << std::fixed << std::setprecision(2)
        << std::setw(8) << r[m].mean << " +- " << r[m].ci95 << '\n';
  }
  log.unsetf(std::ios::floatfield);
  log << std::setprecision(6);
}

std::string measure_header() {
  std::string h;
  for (Measure m : kAllMeasures) h += "," + std::string(to_string(m)) + "," + std::string(to_string(m)) + "_ci95";
  return h;
}

std::string measure_cells(const MetricsReport& r) {
  std::string row;
  for (Measure m : kAllMeasures) row += "," + fmt(r[m].mean) + "," + fmt(r[m].ci95);
  return row;
}

}  // namespace

Dataset load_data(const RunConfig& cfg) {
  if (!cfg.dataset.empty()) return load_dataset(cfg.dataset);
  SyntheticSpec spec = cfg.synth;
  spec.seed = cfg.seed;
  return generate_synthetic(spec);
}

SimilarityTable build_similarity(const RunConfig& cfg, const Dataset& ds) {
  const auto ids = ds.class_ids();
  SimilarityTable table;
  if (!cfg.similarity.empty()) {
    table = SimilarityTable(ids, load_similarity(cfg.similarity).resolve(ids));
  } else if (cfg.source == OperatorSource::taxonomy) {
    if (cfg.taxonomy.empty()) throw ConfigError("operator.taxonomy: required when operator.source = taxonomy");
    table = taxonomy_path_similarity(load_taxonomy(cfg.taxonomy), ids);
    table = SimilarityTable(ids, table.resolve(ids));
  } else {
    if (!ds.has_attributes()) throw ConfigError("operator.source: dataset has no attributes");
    table = SimilarityTable(ids, attribute_cosine(ds.attribute_matrix()));
  }
  if (cfg.shuffle_operator) {
    table = SimilarityTable(ids, permute_similarity(table.values(), random_permutation(ids.size(), shuffle_seed(cfg))));
  }
  return table;
}

ModelConfig resolve_model(const RunConfig& cfg, const std::string& variant) {
  if (variant == "custom") return finalize(cfg.model);
  return apply_preset(variant, cfg.model, cfg.semantic_kind);
}

TrainConfig resolve_train(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = train_seed(cfg);
  validate(t);
  return t;
}

EvalConfig resolve_eval(const RunConfig& cfg) {
  EvalConfig e = cfg.eval;
  e.episode.n_way = cfg.train.episode.n_way;
  e.episode.k_shot = cfg.train.episode.k_shot;
  e.seed = eval_seed(cfg);
  return e;
}

int cmd_synth(const RunConfig& cfg, const std::string& config_text, std::ostream& log) {
  echo_config(cfg, config_text);
  const Dataset ds = load_data(cfg);
  const fs::path dir = cfg.out / "dataset";
  save_dataset(ds, dir);
  if (!(load_dataset(dir) == ds)) throw Error("dataset round trip mismatch in '" + dir.string() + "'");
  log << "wrote " << ds.num_classes() << " classes to " << dir.string() << '\n';
  return 0;
}

int cmd_build_operator(const RunConfig& cfg, const std::string& config_text, std::ostream& log) {
  echo_config(cfg, config_text);
  const Dataset ds = load_data(cfg);
  const SimilarityTable table = build_similarity(cfg, ds);
  const fs::path path = cfg.out / "similarity.csv";
  save_similarity(table, path);
  if (load_similarity(path).ids() != table.ids()) throw Error("similarity round trip mismatch");
  log << "wrote " << table.ids().size() << "x" << table.ids().size() << " similarity to " << path.string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& config_text, std::ostream& log) {
  echo_config(cfg, config_text);
  const Dataset ds = load_data(cfg);
  TrainResult r;
  const Model m = train_variant(cfg, ds, cfg.variant, log, &r);
  const fs::path ckpt = cfg.out / "model.ckpt";
  save_checkpoint(m, ckpt);
  write_history_csv(r.history, cfg.out / "history.csv");
  load_checkpoint(ckpt);
  expect_rows(cfg.out / "history.csv", r.history.size());
  log << "best epoch " << r.best_epoch << " metric " << r.best_metric << (r.stopped_early ? " (stopped early)" : "")
      << "\nwrote " << ckpt.string() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& config_text, std::ostream& log) {
  echo_config(cfg, config_text);
  const Dataset ds = load_data(cfg);
  const fs::path ckpt = cfg.checkpoint.empty() ? cfg.out / "model.ckpt" : fs::path(cfg.checkpoint);
  const Model m = load_checkpoint(ckpt);
  if (m.universe() != ds.class_ids()) throw ConfigError("eval.checkpoint: model classes do not match the dataset");
  const MetricsReport r = evaluate(m, ds, resolve_eval(cfg));
  write_metrics_csv(r, cfg.out / "metrics.csv");
  write_summary_json(r, cfg.out / "summary.json");
  expect_rows(cfg.out / "metrics.csv", kNumMeasures);
  print_report(r, log);
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& config_text, std::ostream& log) {
  if (cfg.ablate_variants.empty()) throw ConfigError("ablate.variants: empty");
  echo_config(cfg, config_text);
  const Dataset ds = load_data(cfg);
  const EvalConfig ec = resolve_eval(cfg);
  std::string table = "variant" + measure_header() + "\n";
  for (const auto& variant : cfg.ablate_variants) {
    const Model m = train_variant(cfg, ds, variant, log);
    const MetricsReport r = evaluate(m, ds, ec);
    log << "== " << variant << '\n';
    print_report(r, log);
    table += variant + measure_cells(r) + "\n";
  }
  write_text(cfg.out / "ablation.csv", table);
  expect_rows(cfg.out / "ablation.csv", cfg.ablate_variants.size());
  return 0;
}

int cmd_sweep_k(const RunConfig& cfg, const std::string& config_text, std::ostream& log) {
  if (cfg.k_values.empty()) throw ConfigError("sweep.k_values: empty");
  echo_config(cfg, config_text);
  const Dataset ds = load_data(cfg);
  const auto rows = k_sweep(
      [&](std::size_t k) {
        RunConfig c = cfg;
        c.train.episode.k_shot = k;
        return train_variant(c, ds, cfg.variant, log);
      },
      ds, cfg.k_values, resolve_eval(cfg));
  std::string table = "k_shot" + measure_header() + "\n";
  for (const auto& row : rows) {
    log << "== K = " << row.k_shot << '\n';
    print_report(row.report, log);
    table += std::to_string(row.k_shot) + measure_cells(row.report) + "\n";
  }
  write_text(cfg.out / "k_sweep.csv", table);
  expect_rows(cfg.out / "k_sweep.csv", cfg.k_values.size());
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, const std::string& config_text, std::ostream& log) {
  if (cfg.grad_variants.empty()) throw ConfigError("gradcheck.variants: empty");
  echo_config(cfg, config_text);
  // Tiny fixed problem: 3 seen classes, N = 2, K = 2, d = 4.
  SyntheticSpec spec;
  spec.n_train = 5;
  spec.n_novel_val = 2;
  spec.n_novel_test = 2;
  spec.d_attr = 4;
  spec.d_in = 4;
  spec.per_class = 12;
  spec.seed = cfg.seed;
  const Dataset ds = generate_synthetic(spec);
  const Episode ep = sample_train_episode(ds, {2, 2, 2, 1}, derive_seed(cfg.seed, 5));

  double worst = 0.0;
  std::string table = "variant,max_rel_error,worst_parameter,entries\n";
  for (const auto& variant : cfg.grad_variants) {
    ModelConfig mc = cfg.model;
    mc.extractor = ExtractorKind::linear;
    mc.d = 4;
    mc.hidden.clear();
    mc.key_dim = 0;
    mc = apply_preset(variant, mc, OperatorKind::attribute_cosine);
    Model m = make_model(mc, ds, model_seed(cfg));
    // Move off the symmetric initialisation so every gradient path is live.
    Rng rng(derive_seed(cfg.seed, 6));
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (Parameter* p : m.parameters()) {
      for (double& v : p->value.data()) v += u(rng);
    }
    const auto params = m.parameters();
    const GradCheckResult r = finite_difference_check(
        [&](Tape& t) { return forward_episode(m, ep, t).loss; }, params, cfg.grad_step);
    log << std::left << std::setw(20) << variant << std::right << " max rel error " << std::scientific
        << std::setprecision(3) << r.max_rel_error << " (" << r.entries_checked << " entries, worst "
        << r.worst_parameter << ")\n";
    log.unsetf(std::ios::floatfield);
    table += variant + "," + fmt(r.max_rel_error) + "," + r.worst_parameter + "," + std::to_string(r.entries_checked) + "\n";
    worst = std::max(worst, r.max_rel_error);
  }
  write_text(cfg.out / "gradcheck.csv", table);
  expect_rows(cfg.out / "gradcheck.csv", cfg.grad_variants.size());
  const bool ok = worst < cfg.grad_tolerance;
  log << "max rel error " << std::scientific << std::setprecision(3) << worst << (ok ? " < " : " >= ")
      << cfg.grad_tolerance << (ok ? " PASS" : " FAIL") << '\n';
  log.unsetf(std::ios::floatfield);
  return ok ? 0 : 1;
}

}  // namespace gcgpn::cli
