#include <gtest/gtest.h>

#include <cmath>

#include "gcgpn/errors.hpp"
#include "gcgpn/gradcheck.hpp"
#include "gcgpn/model.hpp"
#include "gcgpn/ops.hpp"
#include "gcgpn/presets.hpp"
#include "fixtures.hpp"

using namespace gcgpn;

namespace {

ModelConfig small_config(std::string_view preset, std::size_t d = 4) {
  ModelConfig base;
  base.d = d;
  return apply_preset(preset, base);
}

Matrix row_sums(const Matrix& p) {
  Matrix s(p.rows(), 1);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (double v : p.row(r)) s(r, 0) += v;
  }
  return s;
}

}  // namespace

TEST(Extractor, IdentityAndIdentityWeights) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  ModelConfig cfg = small_config("pn_plus", ds.d_in());
  cfg.extractor = ExtractorKind::identity;
  const Model id = make_model(cfg, ds, 1);
  Rng rng(1);
  const Matrix x = fixtures::random_matrix(3, ds.d_in(), rng);
  Tape t(false);
  EXPECT_TRUE(extract_features(id, t, x).value() == x);

  cfg.extractor = ExtractorKind::linear;
  Model lin = make_model(cfg, ds, 1);
  lin.extractor_weights[0].value = Matrix::identity(ds.d_in());
  EXPECT_TRUE(extract_features(static_cast<const Model&>(lin), t, x).value() == x);
  EXPECT_THROW(extract_features(lin, t, Matrix(2, ds.d_in() + 1)), ShapeError);

  cfg.extractor = ExtractorKind::identity;
  cfg.d = ds.d_in() + 1;
  EXPECT_THROW(make_model(cfg, ds, 1), ShapeError);
}

TEST(Extractor, MlpGradientCheck) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  ModelConfig cfg = small_config("pn_plus", 3);
  cfg.extractor = ExtractorKind::mlp;
  cfg.hidden = {5, 4};
  Model m = make_model(cfg, ds, 2);
  ASSERT_EQ(m.extractor_weights.size(), 3u);
  Rng rng(2);
  const Matrix x = fixtures::random_matrix(4, ds.d_in(), rng);
  const Matrix w = fixtures::random_matrix(4, 3, rng);
  for (auto& b : m.extractor_biases) b.value = fixtures::random_matrix(1, b.value.cols(), rng, 0.1, 0.5);
  std::vector<Parameter*> ps;
  for (std::size_t i = 0; i < 3; ++i) {
    ps.push_back(&m.extractor_weights[i]);
    ps.push_back(&m.extractor_biases[i]);
  }
  const auto r = finite_difference_check([&](Tape& t) { return fixtures::weighted_sum(extract_features(m, t, x), w); }, ps);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_parameter;
}

TEST(NovelPrototypes, HandExamples) {
  Tape t;
  const Matrix one = init_novel_prototypes(t.constant(Matrix{{3, 4}}), 1).value();
  EXPECT_DOUBLE_EQ(one(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(one(0, 1), 0.8);
  const Matrix two = init_novel_prototypes(t.constant(Matrix{{1, 0}, {0, 1}}), 2).value();
  EXPECT_DOUBLE_EQ(two(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(two(0, 1), 0.5);
  const Matrix anti = init_novel_prototypes(t.constant(Matrix{{2, 0}, {-1, 0}}), 2).value();
  EXPECT_EQ(anti(0, 0), 0.0);
  EXPECT_THROW(init_novel_prototypes(t.constant(Matrix(0, 2)), 1), ShapeError);
  EXPECT_THROW(init_novel_prototypes(t.constant(Matrix(2, 2)), 0), ShapeError);
}

TEST(Classifier, SymmetryScaleAndLimit) {
  Tape t;
  Var tau = t.constant(Matrix::scalar(3.0));
  const Matrix p = classify(t.constant(Matrix{{1, 1}}), t.constant(Matrix{{1, 0}, {0, 1}}), tau).value();
  EXPECT_NEAR(std::exp(p(0, 0)), 0.5, 1e-15);
  EXPECT_NEAR(std::exp(p(0, 1)), 0.5, 1e-15);

  Rng rng(6);
  const Matrix z = fixtures::random_matrix(4, 5, rng);
  const Matrix c = fixtures::random_matrix(7, 5, rng);
  const Matrix a = classify(t.constant(z), t.constant(c), tau).value();
  const Matrix b = classify(t.constant(z * 5.0), t.constant(c), tau).value();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::exp(a[i]), std::exp(b[i]), 1e-12);
  const Matrix sums = row_sums([&] {
    Matrix e = a;
    for (double& v : e.data()) v = std::exp(v);
    return e;
  }());
  for (double s : sums.data()) EXPECT_NEAR(s, 1.0, 1e-12);

  const Matrix big = classify(t.constant(Matrix{{2, 0}}), t.constant(Matrix{{1, 0}, {0.6, 0.8}}),
                              t.constant(Matrix::scalar(200.0)))
                         .value();
  EXPECT_GT(std::exp(big(0, 0)), 1.0 - 1e-15);
}

TEST(GraphConv, IdentityOperatorNormalizesRows) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  const Model m = make_model(small_config("pn_plus"), ds, 3);
  const Episode ep = sample_train_episode(ds, {2, 1, 1, 1}, 4);
  Rng rng(3);
  const Matrix c = fixtures::random_matrix(ep.num_joint(), 4, rng);
  Tape t(false);
  const Matrix out = graph_conv_block(m, t, t.constant(c), ep).value();
  EXPECT_LT(max_abs_diff(out, row_normalized(c)), 1e-15);
}

TEST(GraphConv, AuxiliaryPairLeavesUnitRowsUnchanged) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  Model m = make_model(small_config("dfsl_avg"), ds, 3);
  m.layer_params[0].theta[1].value = Matrix(1, 4, 2.0);
  const Episode ep = sample_train_episode(ds, {3, 1, 1, 1}, 9);
  Rng rng(4);
  const Matrix c = row_normalized(fixtures::random_matrix(ep.num_joint(), 4, rng));
  Tape t(false);
  EXPECT_LT(max_abs_diff(graph_conv_block(m, t, t.constant(c), ep).value(), c), 1e-15);
}

TEST(GraphConv, UniformOperatorOnIdenticalRows) {
  // Semantic operator with all-equal similarities softmaxes to a uniform row.
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  const std::size_t n = ds.num_classes();
  Model m = make_model(small_config("gcgpn"), ds, 3, Matrix(n, n, 0.3));
  m.layer_params[0].theta[0].value = Matrix{{1.0, -2.0, 0.5, 3.0}};
  const Episode ep = sample_train_episode(ds, {2, 1, 1, 1}, 1);
  const std::vector<double> v{0.3, 1.2, -0.7, 2.0};
  Matrix c(ep.num_joint(), 4);
  for (std::size_t r = 0; r < c.rows(); ++r) std::copy(v.begin(), v.end(), c.row(r).begin());
  Tape t(false);
  const Matrix out = graph_conv_block(m, t, t.constant(c), ep).value();
  const auto expect = fixtures::unit({0.3 * 1.0, 1.2 * -2.0, -0.7 * 0.5, 2.0 * 3.0});
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out(r, j), expect[j], 1e-14);
  }
}

TEST(Forward, PnPlusMatchesGraphFreeOracle) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(5));
  ModelConfig cfg = small_config("pn_plus", 5);
  cfg.tau_init = 4.0;
  const Model m = make_model(cfg, ds, 8);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Episode ep = sample_train_episode(ds, {3, 2, 2, 1}, s);
    EXPECT_LT(max_abs_diff(predict_probabilities(m, ep), fixtures::prototype_softmax_oracle(m, ep)), 1e-12);
  }
}

TEST(Forward, PnPlusSeenQueryNearestOwnPrototype) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(5));
  Model m = make_model(small_config("pn_plus", 5), ds, 8);
  const Episode ep = sample_train_episode(ds, {3, 1, 2, 1}, 2);
  // Put seen class 0's prototype exactly on the feature of its query.
  std::size_t q = 0;
  while (ep.query_labels[q] != 0) ++q;
  Tape t(false);
  const Matrix z = extract_features(static_cast<const Model&>(m), t, ep.queries).value();
  const std::size_t row = m.prototype_row(ep.seen_labels[0]);
  std::copy(z.row(q).begin(), z.row(q).end(), m.seen_prototypes.value.row(row).begin());
  const Matrix p = predict_probabilities(m, ep);
  const auto pr = p.row(q);
  EXPECT_EQ(std::max_element(pr.begin(), pr.end()) - pr.begin(), 0);
}

TEST(Forward, UniformPredictorLossIsLogNPlus) {
  const Dataset ds = generate_synthetic({});
  Model m = make_model(small_config("pn_plus", 32), ds, 1);
  m.tau.value = Matrix::scalar(-800.0);  // exp(tau) underflows to 0: every logit is 0
  const Episode ep = sample_test_episode(ds, NovelPool::novel_test, {5, 1, 15, 1}, 3);
  Tape t;
  EXPECT_NEAR(forward_episode(m, ep, t).loss.value().item(), std::log(69.0), 1e-12);
}

TEST(Forward, DeterministicAndRowsSumToOne) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(1));
  const Model m = make_model(small_config("gcgpn-aux-split"), ds, 4);
  const Episode ep = sample_train_episode(ds, {3, 2, 2, 1}, 11);
  const Matrix a = predict_probabilities(m, ep);
  EXPECT_TRUE(a == predict_probabilities(m, ep));
  const Matrix sums = row_sums(a);
  for (double s : sums.data()) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Forward, FslRestrictsToNovelSpace) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(1));
  Model m = make_model(small_config("pn_plus"), ds, 4);
  const Episode ep = sample_train_episode(ds, {1, 1, 3, 1}, 5);
  Tape t;
  const ForwardResult r = forward_fsl(m, ep, t);
  EXPECT_EQ(r.log_probs.cols(), 1u);
  EXPECT_EQ(r.labels, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_EQ(r.loss.value().item(), 0.0);

  m.tau.value = Matrix::scalar(-800.0);
  const Episode ep5 = sample_train_episode(ds, {5, 1, 2, 1}, 5);
  Tape t2(false);
  const Matrix lp = forward_fsl(m, ep5, t2).log_probs.value();
  for (double v : lp.data()) EXPECT_NEAR(std::exp(v), 0.2, 1e-15);
}

TEST(Forward, EndToEndGradientCheckAllParameterKinds) {
  auto spec = fixtures::small_spec(2);
  spec.n_train = 5;
  spec.d_in = 4;
  const Dataset ds = generate_synthetic(spec);
  for (const char* preset : {"gcgpn-aux", "gcgpn-aux-split", "gcgpn-cos-aux", "gcgpn-l2-aux", "gcgpn-aux-fctheta",
                             "dfsl_att", "pn_plus"}) {
    ModelConfig cfg = small_config(preset, 4);
    cfg.layers = std::string_view(preset) == "gcgpn-cos-aux" ? 2 : 1;
    Model m = make_model(cfg, ds, 12);
    Rng rng(9);
    for (Parameter* p : m.parameters()) {
      for (double& v : p->value.data()) v += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    const Episode ep = sample_train_episode(ds, {2, 2, 2, 1}, 3);
    ASSERT_EQ(ep.num_seen(), 3u);
    const auto params = m.parameters();
    const auto r = finite_difference_check([&](Tape& t) { return forward_episode(m, ep, t).loss; }, params);
    EXPECT_LT(r.max_rel_error, 1e-4) << preset << ": " << r.worst_parameter;
  }
}

TEST(Forward, PermutingClassOrderPermutesColumns) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(3));
  for (const char* preset : {"gcgpn-aux", "gcgpn-cos-aux", "gcgpn-aux-split"}) {
    const Model m = make_model(small_config(preset, 5), ds, 7);
    const Episode ep = sample_train_episode(ds, {3, 2, 2, 1}, 21);
    // Reverse the seen order and rotate the novel order.
    Episode pe = ep;
    const std::size_t ns = ep.num_seen(), nn = ep.num_novel();
    std::vector<std::size_t> new_pos(ns + nn);
    for (std::size_t s = 0; s < ns; ++s) new_pos[s] = ns - 1 - s;
    for (std::size_t n = 0; n < nn; ++n) new_pos[ns + n] = ns + (n + 1) % nn;
    for (std::size_t j = 0; j < ns + nn; ++j) {
      const std::size_t cls = j < ns ? ep.seen_labels[j] : ep.novel_labels[j - ns];
      if (new_pos[j] < ns) pe.seen_labels[new_pos[j]] = cls;
      else pe.novel_labels[new_pos[j] - ns] = cls;
    }
    for (std::size_t n = 0; n < nn; ++n) {
      for (std::size_t k = 0; k < ep.shot_count; ++k) {
        const auto src = ep.support.row(n * ep.shot_count + k);
        std::copy(src.begin(), src.end(), pe.support.row((new_pos[ns + n] - ns) * ep.shot_count + k).begin());
      }
    }
    for (auto& l : pe.query_labels) l = new_pos[l];
    const Matrix a = predict_probabilities(m, ep);
    const Matrix b = predict_probabilities(m, pe);
    for (std::size_t q = 0; q < a.rows(); ++q) {
      for (std::size_t j = 0; j < a.cols(); ++j) EXPECT_NEAR(b(q, new_pos[j]), a(q, j), 1e-12) << preset;
    }
  }
}

TEST(Model, ParametersAndShapes) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  const Model m = make_model(small_config("gcgpn-aux-fctheta", 6), ds, 1);
  EXPECT_EQ(m.seen_prototypes.value.rows(), 10u);
  EXPECT_TRUE(m.layer_params[0].theta[0].value == Matrix::identity(6));
  EXPECT_EQ(m.layer_params[0].scale[2].value.item(), 1.0);
  EXPECT_EQ(m.tau.value.item(), 0.0);
  EXPECT_EQ(m.operator_params[0].temperature.value.item(), 0.0);
  EXPECT_TRUE(m.operator_params[1].temperature.value.empty());
  // extractor w,b + prototypes + tau + op temperature + 3 x (theta, scale)
  EXPECT_EQ(m.parameters().size(), 2u + 1u + 1u + 1u + 6u);
  EXPECT_THROW(m.prototype_row(ds.classes_in(Split::novel_test)[0]), LookupError);
}

TEST(Model, SpecialCasesForceStructure) {
  ModelConfig cfg;
  cfg.special_case = SpecialCase::pn_plus;
  cfg.operators = {parse_operator_spec("proto_cosine")};
  cfg.layers = 3;
  cfg.rho = Rho::relu;
  const ModelConfig f = finalize(cfg);
  ASSERT_EQ(f.operators.size(), 1u);
  EXPECT_EQ(f.operators[0].kind, OperatorKind::identity);
  EXPECT_FALSE(f.operators[0].theta_trainable);
  EXPECT_FALSE(f.operators[0].scale_trainable);
  EXPECT_EQ(f.rho, Rho::identity);
  EXPECT_EQ(f.layers, 1u);

  cfg.special_case = SpecialCase::dfsl_avg;
  const ModelConfig g = finalize(cfg);
  ASSERT_EQ(g.operators.size(), 2u);
  EXPECT_EQ(g.operators[0].kind, OperatorKind::aux_seen_self);
  EXPECT_FALSE(g.operators[0].theta_trainable);
  EXPECT_TRUE(g.operators[1].theta_trainable);
  EXPECT_EQ(g.theta_form, ThetaForm::diagonal);

  ModelConfig empty;
  EXPECT_THROW(finalize(empty), ConfigError);
}

TEST(Model, ConfigKeyValuesRoundTrip) {
  ModelConfig cfg = small_config("gcgpn-aux-split", 7);
  cfg.extractor = ExtractorKind::mlp;
  cfg.hidden = {12, 9};
  cfg.tau_init = 2.5;
  cfg.key_dim = 3;
  EXPECT_TRUE(model_config_from_key_values(to_key_values(cfg)) == cfg);
  EXPECT_THROW(model_config_from_key_values({{"dd", "3"}}), ConfigError);
  EXPECT_THROW(model_config_from_key_values({{"d", "x"}}), ConfigError);
}

TEST(Model, SemanticOperatorsNeedSimilarity) {
  const Dataset ds = generate_synthetic(fixtures::small_spec());
  EXPECT_THROW(make_model(apply_preset("gcgpn", {}, OperatorKind::semantic_file), ds, 1), ConfigError);
  EXPECT_THROW(make_model(apply_preset("gcgpn", {}), ds, 1, Matrix(3, 3)), ConfigError);
  EXPECT_NO_THROW(make_model(apply_preset("gcgpn", {}), ds, 1));
}

TEST(Model, PrototypesFromDataAreNormalizedMeans) {
  const Dataset ds = generate_synthetic(fixtures::small_spec(4));
  Model m = make_model(small_config("pn_plus", 5), ds, 2);
  set_prototypes_from_data(m, ds);
  const std::size_t cls = m.seen_classes()[3];
  const auto rows = ds.cls(cls).rows(Portion::train);
  std::vector<double> acc(5, 0.0);
  for (std::size_t r : rows) {
    const auto z = fixtures::unit(fixtures::linear_features(m, ds.cls(cls).instances.row(r)));
    for (std::size_t j = 0; j < 5; ++j) acc[j] += z[j] / double(rows.size());
  }
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(m.seen_prototypes.value(3, j), acc[j], 1e-14);
}
