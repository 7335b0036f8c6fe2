#include "gcgpn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gcgpn/errors.hpp"
#include "gcgpn/ops.hpp"
#include "gcgpn/random.hpp"
#include "gcgpn/similarity.hpp"
#include "text_util.hpp"

namespace gcgpn {

std::string_view to_string(ExtractorKind k) {
  switch (k) {
    case ExtractorKind::identity: return "identity";
    case ExtractorKind::linear: return "linear";
    case ExtractorKind::mlp: return "mlp";
  }
  return "linear";
}

std::string_view to_string(Rho r) { return r == Rho::identity ? "identity" : "relu"; }
std::string_view to_string(ThetaForm f) { return f == ThetaForm::diagonal ? "diagonal" : "full"; }

std::string_view to_string(SpecialCase s) {
  switch (s) {
    case SpecialCase::none: return "none";
    case SpecialCase::pn_plus: return "pn_plus";
    case SpecialCase::dfsl_avg: return "dfsl_avg";
  }
  return "none";
}

ExtractorKind parse_extractor_kind(std::string_view s) {
  if (s == "identity") return ExtractorKind::identity;
  if (s == "linear") return ExtractorKind::linear;
  if (s == "mlp") return ExtractorKind::mlp;
  throw ConfigError("unknown extractor '" + std::string(s) + "'");
}

Rho parse_rho(std::string_view s) {
  if (s == "identity") return Rho::identity;
  if (s == "relu") return Rho::relu;
  throw ConfigError("unknown rho '" + std::string(s) + "'");
}

ThetaForm parse_theta_form(std::string_view s) {
  if (s == "diagonal") return ThetaForm::diagonal;
  if (s == "full") return ThetaForm::full;
  throw ConfigError("unknown theta form '" + std::string(s) + "'");
}

SpecialCase parse_special_case(std::string_view s) {
  if (s == "none") return SpecialCase::none;
  if (s == "pn_plus") return SpecialCase::pn_plus;
  if (s == "dfsl_avg") return SpecialCase::dfsl_avg;
  throw ConfigError("unknown special case '" + std::string(s) + "'");
}

ModelConfig finalize(ModelConfig cfg) {
  if (cfg.special_case == SpecialCase::pn_plus) {
    OperatorSpec id{OperatorKind::identity, Normalization::none, BlockSet::all(), false, false};
    cfg.operators = {id};
    cfg.rho = Rho::identity;
    cfg.layers = 1;
  } else if (cfg.special_case == SpecialCase::dfsl_avg) {
    OperatorSpec seen{OperatorKind::aux_seen_self, Normalization::none, BlockSet::all(), false, false};
    OperatorSpec novel{OperatorKind::aux_novel_self, Normalization::none, BlockSet::all(), true, false};
    cfg.operators = {seen, novel};
    cfg.rho = Rho::identity;
    cfg.theta_form = ThetaForm::diagonal;
    cfg.layers = 1;
  }
  if (cfg.d == 0) throw ConfigError("model.d must be positive");
  if (cfg.layers == 0) throw ConfigError("model.layers must be at least 1");
  if (cfg.operators.empty()) throw ConfigError("model needs at least one operator");
  if (!(cfg.tau_init > 0.0)) throw ConfigError("model.tau_init must be positive");
  if (!(cfg.operator_temperature_init > 0.0)) {
    throw ConfigError("model.operator_temperature_init must be positive");
  }
  for (const auto& op : cfg.operators) validate(op);
  return cfg;
}

std::map<std::string, std::string> to_key_values(const ModelConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["variant"] = cfg.variant;
  kv["special_case"] = to_string(cfg.special_case);
  kv["extractor"] = to_string(cfg.extractor);
  std::string hidden;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    if (i) hidden += ',';
    hidden += std::to_string(cfg.hidden[i]);
  }
  kv["hidden"] = hidden;
  kv["d"] = std::to_string(cfg.d);
  kv["layers"] = std::to_string(cfg.layers);
  kv["rho"] = to_string(cfg.rho);
  kv["theta_form"] = to_string(cfg.theta_form);
  kv["tau_init"] = detail::format_double(cfg.tau_init);
  kv["operator_temperature_init"] = detail::format_double(cfg.operator_temperature_init);
  kv["key_dim"] = std::to_string(cfg.key_dim);
  std::string ops;
  for (std::size_t i = 0; i < cfg.operators.size(); ++i) {
    if (i) ops += ';';
    ops += to_string(cfg.operators[i]);
  }
  kv["operators"] = ops;
  return kv;
}

namespace {

std::size_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("model." + key + ": expected a non-negative integer, got '" + v + "'");
  }
}

}  // namespace

ModelConfig model_config_from_key_values(const std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "variant") cfg.variant = value;
    else if (key == "special_case") cfg.special_case = parse_special_case(value);
    else if (key == "extractor") cfg.extractor = parse_extractor_kind(value);
    else if (key == "hidden") {
      cfg.hidden.clear();
      if (!detail::trim(value).empty()) {
        for (auto part : detail::split(value, ',')) cfg.hidden.push_back(parse_count(key, std::string(detail::trim(part))));
      }
    } else if (key == "d") cfg.d = parse_count(key, value);
    else if (key == "layers") cfg.layers = parse_count(key, value);
    else if (key == "rho") cfg.rho = parse_rho(value);
    else if (key == "theta_form") cfg.theta_form = parse_theta_form(value);
    else if (key == "tau_init") cfg.tau_init = detail::parse_double(value, 0);
    else if (key == "operator_temperature_init") cfg.operator_temperature_init = detail::parse_double(value, 0);
    else if (key == "key_dim") cfg.key_dim = parse_count(key, value);
    else if (key == "operators") {
      cfg.operators.clear();
      if (!detail::trim(value).empty()) {
        for (auto part : detail::split(value, ';')) cfg.operators.push_back(parse_operator_spec(part));
      }
    } else {
      throw ConfigError("unknown model key '" + key + "'");
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Model

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

Matrix random_unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m = gaussian(rows, cols, 1.0, rng);
  return row_normalized(m);
}

bool has_temperature(const OperatorSpec& spec) {
  return spec.normalization == Normalization::row_softmax || spec.kind == OperatorKind::key_attention;
}

}  // namespace

Model::Model(ModelConfig config, std::vector<std::string> universe, std::vector<std::size_t> seen_classes,
             std::size_t d_in, Matrix semantic, std::uint64_t seed)
    : config_(finalize(std::move(config))),
      universe_(std::move(universe)),
      seen_classes_(std::move(seen_classes)),
      prototype_row_(universe_.size(), -1),
      d_in_(d_in) {
  for (std::size_t r = 0; r < seen_classes_.size(); ++r) {
    if (seen_classes_[r] >= universe_.size()) {
      throw IndexError("seen class index " + std::to_string(seen_classes_[r]) + " outside universe");
    }
    prototype_row_[seen_classes_[r]] = static_cast<std::ptrdiff_t>(r);
  }
  set_semantic(std::move(semantic));

  const std::size_t d = config_.d;
  Rng rng(seed);

  switch (config_.extractor) {
    case ExtractorKind::identity:
      if (d_in_ != d) {
        throw ShapeError("identity extractor needs d_in == d, got " + std::to_string(d_in_) + " and " +
                         std::to_string(d));
      }
      break;
    case ExtractorKind::linear:
      extractor_weights.emplace_back("extractor.w0", gaussian(d_in_, d, 1.0 / std::sqrt(double(d_in_)), rng));
      extractor_biases.emplace_back("extractor.b0", Matrix(1, d));
      break;
    case ExtractorKind::mlp: {
      std::vector<std::size_t> widths{d_in_};
      widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
      widths.push_back(d);
      for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const bool last = i + 2 == widths.size();
        const double stddev = std::sqrt((last ? 1.0 : 2.0) / double(widths[i]));
        extractor_weights.emplace_back("extractor.w" + std::to_string(i),
                                       gaussian(widths[i], widths[i + 1], stddev, rng));
        extractor_biases.emplace_back("extractor.b" + std::to_string(i), Matrix(1, widths[i + 1]));
      }
      break;
    }
  }

  seen_prototypes = Parameter("seen_prototypes", random_unit_rows(seen_classes_.size(), d, rng));
  tau = Parameter("tau", Matrix::scalar(std::log(config_.tau_init)));

  const std::size_t key_dim = config_.key_dim == 0 ? d : config_.key_dim;
  for (std::size_t k = 0; k < config_.operators.size(); ++k) {
    const OperatorSpec& spec = config_.operators[k];
    const std::string prefix = "op" + std::to_string(k) + ".";
    OperatorParams p;
    if (has_temperature(spec)) {
      p.temperature = Parameter(prefix + "temperature",
                                Matrix::scalar(std::log(config_.operator_temperature_init)));
    }
    if (spec.kind == OperatorKind::key_attention) {
      p.keys = Parameter(prefix + "keys", random_unit_rows(seen_classes_.size(), key_dim, rng));
      p.projection = Parameter(prefix + "projection", key_dim == d ? Matrix::identity(d)
                                                                  : gaussian(d, key_dim, 1.0 / std::sqrt(double(d)), rng));
    }
    operator_params.push_back(std::move(p));
  }

  for (std::size_t l = 0; l < config_.layers; ++l) {
    LayerParams lp;
    for (std::size_t k = 0; k < config_.operators.size(); ++k) {
      const OperatorSpec& spec = config_.operators[k];
      const std::string prefix = "layer" + std::to_string(l) + ".op" + std::to_string(k) + ".";
      Matrix theta = config_.theta_form == ThetaForm::diagonal ? Matrix(1, d, 1.0) : Matrix::identity(d);
      lp.theta.emplace_back(prefix + "theta", std::move(theta), spec.theta_trainable);
      lp.scale.emplace_back(prefix + "scale", Matrix::scalar(1.0), spec.scale_trainable);
    }
    layer_params.push_back(std::move(lp));
  }
}

void Model::set_semantic(Matrix semantic) {
  const bool needs = std::any_of(config_.operators.begin(), config_.operators.end(),
                                 [](const OperatorSpec& s) { return is_semantic(s.kind); });
  if (needs) {
    if (semantic.rows() != universe_.size() || semantic.cols() != universe_.size()) {
      throw ConfigError("semantic operators need a " + std::to_string(universe_.size()) + "x" +
                        std::to_string(universe_.size()) + " similarity matrix, got " +
                        shape_string(semantic));
    }
    if (!semantic.all_finite()) throw ConfigError("semantic similarity matrix has non-finite entries");
  }
  semantic_ = std::move(semantic);
}

std::size_t Model::prototype_row(std::size_t universe_index) const {
  if (universe_index >= prototype_row_.size() || prototype_row_[universe_index] < 0) {
    throw LookupError("class " +
                      (universe_index < universe_.size() ? "'" + universe_[universe_index] + "'"
                                                         : std::to_string(universe_index)) +
                      " has no seen prototype");
  }
  return static_cast<std::size_t>(prototype_row_[universe_index]);
}

namespace {

template <class M, class P>
std::vector<P*> collect(M& m) {
  std::vector<P*> out;
  auto push = [&](P& p) {
    if (!p.value.empty()) out.push_back(&p);
  };
  for (std::size_t i = 0; i < m.extractor_weights.size(); ++i) {
    push(m.extractor_weights[i]);
    push(m.extractor_biases[i]);
  }
  push(m.seen_prototypes);
  push(m.tau);
  for (auto& op : m.operator_params) {
    push(op.temperature);
    push(op.keys);
    push(op.projection);
  }
  for (auto& layer : m.layer_params) {
    for (std::size_t k = 0; k < layer.theta.size(); ++k) {
      push(layer.theta[k]);
      push(layer.scale[k]);
    }
  }
  return out;
}

}  // namespace

std::vector<Parameter*> Model::parameters() { return collect<Model, Parameter>(*this); }
std::vector<const Parameter*> Model::parameters() const {
  return collect<const Model, const Parameter>(*this);
}

Model make_model(const ModelConfig& config, const Dataset& ds, std::uint64_t seed, Matrix semantic) {
  const ModelConfig cfg = finalize(config);
  if (semantic.empty()) {
    for (const auto& op : cfg.operators) {
      if (op.kind == OperatorKind::attribute_cosine) {
        if (!ds.has_attributes()) throw ConfigError("attribute_cosine operator needs dataset attributes");
        semantic = attribute_cosine(ds.attribute_matrix());
        break;
      }
      if (is_semantic(op.kind)) {
        throw ConfigError(std::string(to_string(op.kind)) + " operator needs a similarity matrix");
      }
    }
  }
  return Model(cfg, ds.class_ids(), ds.classes_in(Split::train), ds.d_in(), std::move(semantic), seed);
}

// ---------------------------------------------------------------------------
// Forward pass

namespace {

Var bind(Tape& t, Parameter& p) { return t.parameter(p); }
Var bind(Tape& t, const Parameter& p) { return t.constant(p.value); }

template <class M>
Var extract_impl(M& m, Tape& t, const Matrix& x) {
  if (x.cols() != m.d_in()) {
    throw ShapeError("extractor expects " + std::to_string(m.d_in()) + " input features, got " +
                     std::to_string(x.cols()));
  }
  Var h = t.constant(x);
  const std::size_t layers = m.extractor_weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    h = add_row(matmul(h, bind(t, m.extractor_weights[i])), bind(t, m.extractor_biases[i]));
    if (i + 1 < layers) h = relu(h);
  }
  return h;
}

std::vector<std::size_t> range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out(end - begin);
  std::iota(out.begin(), out.end(), begin);
  return out;
}

template <class M>
Var graph_conv_impl(M& m, Tape& t, Var prototypes, const Episode& ep) {
  const ModelConfig& cfg = m.config();
  const std::size_t n_seen = ep.num_seen();
  const std::size_t n_novel = ep.num_novel();
  const std::size_t n = n_seen + n_novel;
  if (prototypes.rows() != n || prototypes.cols() != cfg.d) {
    throw ShapeError("graph convolution expects " + std::to_string(n) + "x" + std::to_string(cfg.d) +
                     " prototypes, got " + shape_string(prototypes.value()));
  }
  const std::size_t n_ops = cfg.operators.size();

  Matrix semantic;
  const bool any_semantic = std::any_of(cfg.operators.begin(), cfg.operators.end(),
                                        [](const OperatorSpec& s) { return is_semantic(s.kind); });
  if (any_semantic) semantic = build_semantic(m.semantic(), ep.joint_labels());
  const AuxiliaryPair aux = auxiliary_operators(n_seen, n_novel);

  std::vector<Matrix> masks(n_ops);
  std::vector<Var> inv_temperature(n_ops);
  std::vector<Var> seen_keys(n_ops);
  std::vector<Var> projection(n_ops);
  std::vector<Var> static_ops(n_ops);
  std::vector<std::size_t> seen_rows;
  for (std::size_t s : ep.seen_labels) seen_rows.push_back(m.prototype_row(s));

  for (std::size_t k = 0; k < n_ops; ++k) {
    const OperatorSpec& spec = cfg.operators[k];
    auto& params = m.operator_params[k];
    masks[k] = block_mask(n_seen, n_novel, spec.block_mask);
    if (!params.temperature.value.empty()) inv_temperature[k] = exp(bind(t, params.temperature));
    switch (spec.kind) {
      case OperatorKind::identity:
        static_ops[k] = t.constant(Matrix::identity(n));
        break;
      case OperatorKind::aux_seen_self:
        static_ops[k] = t.constant(aux.seen_self);
        break;
      case OperatorKind::aux_novel_self:
        static_ops[k] = t.constant(aux.novel_self);
        break;
      case OperatorKind::semantic_file:
      case OperatorKind::taxonomy_path:
      case OperatorKind::attribute_cosine:
        if (spec.normalization == Normalization::row_softmax) {
          static_ops[k] = normalize_operator(t.constant(semantic), masks[k], inv_temperature[k]);
        } else {
          static_ops[k] = t.constant(mask_blocks(semantic, n_seen, spec.block_mask));
        }
        break;
      case OperatorKind::key_attention:
        seen_keys[k] = gather_rows(bind(t, params.keys), seen_rows);
        projection[k] = bind(t, params.projection);
        break;
      case OperatorKind::proto_cosine:
      case OperatorKind::proto_l2:
        break;
    }
  }

  const auto novel_rows = range(n_seen, n);
  Var x = prototypes;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    auto& layer = m.layer_params[l];
    Var x_bar = row_normalize(x);
    std::vector<Var> terms;
    terms.reserve(n_ops);
    for (std::size_t k = 0; k < n_ops; ++k) {
      const OperatorSpec& spec = cfg.operators[k];
      Var op = static_ops[k];
      if (spec.kind == OperatorKind::proto_cosine || spec.kind == OperatorKind::proto_l2) {
        Var raw = dynamic_prototype_operator(
            x, spec.kind == OperatorKind::proto_cosine ? PrototypeMetric::cosine : PrototypeMetric::l2);
        op = spec.normalization == Normalization::row_softmax
                 ? normalize_operator(raw, masks[k], inv_temperature[k])
                 : mul_mask(raw, masks[k]);
      } else if (spec.kind == OperatorKind::key_attention) {
        op = key_attention_operator(seen_keys[k], gather_rows(x, novel_rows), projection[k],
                                    inv_temperature[k]);
      }
      Var h = matmul(op, x_bar);
      Var theta = bind(t, layer.theta[k]);
      h = cfg.theta_form == ThetaForm::diagonal ? mul_cols(h, theta) : matmul(h, theta);
      terms.push_back(mul_scalar(row_normalize(h), bind(t, layer.scale[k])));
    }
    x = add_n(terms);
    if (cfg.rho == Rho::relu) x = relu(x);
  }
  return x;
}

template <class M>
ForwardResult forward_impl(M& m, const Episode& ep, Tape& t, bool fsl_objective) {
  if (ep.shot_count == 0 || ep.support.rows() != ep.num_novel() * ep.shot_count) {
    throw ShapeError("episode support has " + std::to_string(ep.support.rows()) + " rows for " +
                     std::to_string(ep.num_novel()) + " classes x K=" + std::to_string(ep.shot_count));
  }
  ForwardResult r;
  r.support_features = extract_impl(m, t, ep.support);
  r.query_features = extract_impl(m, t, ep.queries);
  Var novel = init_novel_prototypes(r.support_features, ep.shot_count);

  std::vector<std::size_t> seen_rows;
  seen_rows.reserve(ep.num_seen());
  for (std::size_t s : ep.seen_labels) seen_rows.push_back(m.prototype_row(s));
  Var seen = gather_rows(bind(t, m.seen_prototypes), seen_rows);
  r.prototypes = concat_rows(seen, novel);
  r.updated_prototypes = graph_conv_impl(m, t, r.prototypes, ep);
  Var tau = exp(bind(t, m.tau));

  if (!fsl_objective) {
    r.log_probs = classify(r.query_features, r.updated_prototypes, tau);
    r.labels = ep.query_labels;
  } else {
    const std::size_t n_seen = ep.num_seen();
    std::vector<std::size_t> novel_queries;
    for (std::size_t q = 0; q < ep.num_queries(); ++q) {
      if (ep.is_novel_query(q)) {
        novel_queries.push_back(q);
        r.labels.push_back(ep.query_labels[q] - n_seen);
      }
    }
    Var z = gather_rows(r.query_features, novel_queries);
    Var c = gather_rows(r.updated_prototypes, range(n_seen, ep.num_joint()));
    r.log_probs = classify(z, c, tau);
  }
  if (!r.labels.empty()) r.loss = cross_entropy(r.log_probs, r.labels);
  return r;
}

}  // namespace

Var extract_features(Model& m, Tape& t, const Matrix& x) { return extract_impl(m, t, x); }
Var extract_features(const Model& m, Tape& t, const Matrix& x) { return extract_impl(m, t, x); }

Var init_novel_prototypes(Var support_features, std::size_t k_shot) {
  if (k_shot == 0 || support_features.rows() == 0) throw ShapeError("empty support set");
  return mean_row_groups(row_normalize(support_features), k_shot);
}

Var classify(Var queries, Var prototypes, Var tau) {
  return log_softmax_rows(mul_scalar(cosine_similarity(queries, prototypes), tau));
}

Var graph_conv_block(Model& m, Tape& t, Var prototypes, const Episode& ep) {
  return graph_conv_impl(m, t, prototypes, ep);
}
Var graph_conv_block(const Model& m, Tape& t, Var prototypes, const Episode& ep) {
  return graph_conv_impl(m, t, prototypes, ep);
}

ForwardResult forward_episode(Model& m, const Episode& ep, Tape& t) { return forward_impl(m, ep, t, false); }
ForwardResult forward_episode(const Model& m, const Episode& ep, Tape& t) {
  return forward_impl(m, ep, t, false);
}
ForwardResult forward_fsl(Model& m, const Episode& ep, Tape& t) { return forward_impl(m, ep, t, true); }
ForwardResult forward_fsl(const Model& m, const Episode& ep, Tape& t) { return forward_impl(m, ep, t, true); }

Matrix predict_probabilities(const Model& m, const Episode& ep) {
  Tape t(false);
  Matrix p = forward_episode(m, ep, t).log_probs.value();
  for (double& v : p.data()) v = std::exp(v);
  return p;
}

void set_prototypes_from_data(Model& m, const Dataset& ds) {
  const Model& cm = m;
  for (std::size_t r = 0; r < m.seen_classes().size(); ++r) {
    const ClassRecord& c = ds.cls(m.seen_classes()[r]);
    const auto rows = c.rows(Portion::train);
    Matrix x(rows.size(), c.instances.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy_n(c.instances.row(rows[i]).begin(), x.cols(), x.row(i).begin());
    Tape t(false);
    const Matrix proto = init_novel_prototypes(extract_features(cm, t, x), rows.size()).value();
    std::copy_n(proto.row(0).begin(), proto.cols(), m.seen_prototypes.value.row(r).begin());
  }
}

}  // namespace gcgpn
