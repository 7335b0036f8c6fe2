#include "cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gcgpn/errors.hpp"
#include "gcgpn/presets.hpp"
#include "gcgpn/random.hpp"

namespace gcgpn::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

template <class T>
T integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool boolean(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::size_t> sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& part : split_list(v)) out.push_back(integer<std::size_t>(key, part));
  return out;
}

std::string sizes_str(const std::vector<std::size_t>& v) {
  std::vector<std::string> parts;
  for (auto x : v) parts.push_back(std::to_string(x));
  return join(parts);
}

struct Key {
  std::string name;  // section.key
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define SIZE_KEY(NAME, FIELD)                                                  \
  Key {                                                                        \
    NAME, [](const RunConfig& c) { return std::to_string(c.FIELD); },          \
        [](RunConfig& c, const std::string& v) { c.FIELD = integer<std::size_t>(NAME, v); } \
  }
#define REAL_KEY(NAME, FIELD)                                                  \
  Key {                                                                        \
    NAME, [](const RunConfig& c) { return num(c.FIELD); },                     \
        [](RunConfig& c, const std::string& v) { c.FIELD = real(NAME, v); }    \
  }
#define TEXT_KEY(NAME, FIELD)                                                  \
  Key {                                                                        \
    NAME, [](const RunConfig& c) { return std::string(c.FIELD); },             \
        [](RunConfig& c, const std::string& v) { c.FIELD = v; }                \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      {"run.seed", [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) { c.seed = integer<std::uint64_t>("run.seed", v); }},
      {"run.out", [](const RunConfig& c) { return c.out.string(); },
       [](RunConfig& c, const std::string& v) { c.out = v; }},

      TEXT_KEY("data.path", dataset),
      SIZE_KEY("synth.n_train", synth.n_train),
      SIZE_KEY("synth.n_novel_val", synth.n_novel_val),
      SIZE_KEY("synth.n_novel_test", synth.n_novel_test),
      SIZE_KEY("synth.d_attr", synth.d_attr),
      SIZE_KEY("synth.d_in", synth.d_in),
      SIZE_KEY("synth.per_class", synth.per_class),
      REAL_KEY("synth.noise_scale", synth.noise_scale),
      REAL_KEY("synth.holdout_val_fraction", synth.holdout_val_fraction),
      REAL_KEY("synth.holdout_test_fraction", synth.holdout_test_fraction),

      {"operator.source",
       [](const RunConfig& c) { return std::string(c.source == OperatorSource::taxonomy ? "taxonomy" : "attributes"); },
       [](RunConfig& c, const std::string& v) {
         if (v == "attributes") c.source = OperatorSource::attributes;
         else if (v == "taxonomy") c.source = OperatorSource::taxonomy;
         else throw ConfigError("operator.source: expected attributes or taxonomy, got '" + v + "'");
       }},
      TEXT_KEY("operator.taxonomy", taxonomy),
      TEXT_KEY("operator.similarity", similarity),
      {"operator.semantic_kind", [](const RunConfig& c) { return std::string(to_string(c.semantic_kind)); },
       [](RunConfig& c, const std::string& v) {
         const OperatorKind k = parse_operator_kind(v);
         if (!is_semantic(k)) throw ConfigError("operator.semantic_kind: '" + v + "' is not a semantic kind");
         c.semantic_kind = k;
       }},
      {"operator.shuffle", [](const RunConfig& c) { return std::string(c.shuffle_operator ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) { c.shuffle_operator = boolean("operator.shuffle", v); }},

      {"model.variant", [](const RunConfig& c) { return c.variant; },
       [](RunConfig& c, const std::string& v) {
         if (v != "custom" && !is_preset(v)) throw ConfigError("model.variant: unknown variant '" + v + "'");
         c.variant = v;
       }},
      {"model.extractor", [](const RunConfig& c) { return std::string(to_string(c.model.extractor)); },
       [](RunConfig& c, const std::string& v) { c.model.extractor = parse_extractor_kind(v); }},
      {"model.hidden", [](const RunConfig& c) { return sizes_str(c.model.hidden); },
       [](RunConfig& c, const std::string& v) { c.model.hidden = sizes("model.hidden", v); }},
      SIZE_KEY("model.d", model.d),
      SIZE_KEY("model.layers", model.layers),
      {"model.rho", [](const RunConfig& c) { return std::string(to_string(c.model.rho)); },
       [](RunConfig& c, const std::string& v) { c.model.rho = parse_rho(v); }},
      {"model.theta_form", [](const RunConfig& c) { return std::string(to_string(c.model.theta_form)); },
       [](RunConfig& c, const std::string& v) { c.model.theta_form = parse_theta_form(v); }},
      REAL_KEY("model.tau_init", model.tau_init),
      REAL_KEY("model.operator_temperature_init", model.operator_temperature_init),
      SIZE_KEY("model.key_dim", model.key_dim),
      {"model.operators",
       [](const RunConfig& c) {
         std::vector<std::string> parts;
         for (const auto& op : c.model.operators) parts.push_back(to_string(op));
         return join(parts, ";");
       },
       [](RunConfig& c, const std::string& v) {
         c.model.operators.clear();
         for (const auto& part : split_list(v, ';')) c.model.operators.push_back(parse_operator_spec(part));
       }},

      SIZE_KEY("episode.n_way", train.episode.n_way),
      SIZE_KEY("episode.k_shot", train.episode.k_shot),
      SIZE_KEY("episode.novel_queries", train.episode.novel_queries),
      SIZE_KEY("episode.seen_queries", train.episode.seen_queries),

      SIZE_KEY("train.epochs", train.epochs),
      SIZE_KEY("train.episodes_per_epoch", train.episodes_per_epoch),
      REAL_KEY("train.lr_init", train.lr_init),
      {"train.lr_milestones", [](const RunConfig& c) { return sizes_str(c.train.lr_milestones); },
       [](RunConfig& c, const std::string& v) { c.train.lr_milestones = sizes("train.lr_milestones", v); }},
      REAL_KEY("train.lr_decay_factor", train.lr_decay_factor),
      REAL_KEY("train.momentum", train.momentum),
      REAL_KEY("train.weight_decay", train.weight_decay),
      {"train.objective", [](const RunConfig& c) { return std::string(to_string(c.train.objective)); },
       [](RunConfig& c, const std::string& v) { c.train.objective = parse_objective(v); }},
      SIZE_KEY("train.val_episodes", train.val_episodes),
      {"train.monitor", [](const RunConfig& c) { return std::string(to_string(c.train.monitor)); },
       [](RunConfig& c, const std::string& v) { c.train.monitor = parse_measure(v); }},
      SIZE_KEY("train.patience", train.patience),

      {"eval.pool",
       [](const RunConfig& c) { return std::string(c.eval.pool == NovelPool::novel_val ? "novel_val" : "novel_test"); },
       [](RunConfig& c, const std::string& v) {
         if (v == "novel_val") c.eval.pool = NovelPool::novel_val;
         else if (v == "novel_test") c.eval.pool = NovelPool::novel_test;
         else throw ConfigError("eval.pool: expected novel_val or novel_test, got '" + v + "'");
       }},
      SIZE_KEY("eval.n_episodes", eval.n_episodes),
      SIZE_KEY("eval.novel_queries", eval.episode.novel_queries),
      SIZE_KEY("eval.seen_queries", eval.episode.seen_queries),
      SIZE_KEY("eval.threads", eval.threads),
      TEXT_KEY("eval.checkpoint", checkpoint),

      {"ablate.variants", [](const RunConfig& c) { return join(c.ablate_variants); },
       [](RunConfig& c, const std::string& v) {
         c.ablate_variants = split_list(v);
         for (const auto& name : c.ablate_variants) {
           if (!is_preset(name)) throw ConfigError("ablate.variants: unknown variant '" + name + "'");
         }
       }},
      {"sweep.k_values", [](const RunConfig& c) { return sizes_str(c.k_values); },
       [](RunConfig& c, const std::string& v) { c.k_values = sizes("sweep.k_values", v); }},

      REAL_KEY("gradcheck.step", grad_step),
      REAL_KEY("gradcheck.tolerance", grad_tolerance),
      {"gradcheck.variants", [](const RunConfig& c) { return join(c.grad_variants); },
       [](RunConfig& c, const std::string& v) {
         c.grad_variants = split_list(v);
         for (const auto& name : c.grad_variants) {
           if (!is_preset(name)) throw ConfigError("gradcheck.variants: unknown variant '" + name + "'");
         }
       }},
  };
  return table;
}

#undef SIZE_KEY
#undef REAL_KEY
#undef TEXT_KEY

}  // namespace

RunConfig::RunConfig() {
  ablate_variants.assign(preset_names().begin(), preset_names().end());
  ablate_variants.erase(std::remove(ablate_variants.begin(), ablate_variants.end(), "dfsl_att"),
                        ablate_variants.end());
  grad_variants = preset_names();
}

void set_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  for (const Key& k : keys()) {
    if (k.name == dotted_key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + dotted_key + "'");
}

RunConfig parse_run_config(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must live in a section");
    for (const auto& [key, value] : body) set_value(cfg, section + "." + key, value.data());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string render(const RunConfig& cfg) {
  std::string out, section;
  for (const Key& k : keys()) {
    const auto dot = k.name.find('.');
    const std::string sec = k.name.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += k.name.substr(dot + 1) + " = " + k.get(cfg) + "\n";
  }
  return out;
}

std::uint64_t model_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, 1); }
std::uint64_t train_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, 2); }
std::uint64_t eval_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, 3); }
std::uint64_t shuffle_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, 4); }

}  // namespace gcgpn::cli
