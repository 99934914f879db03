#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pbdn/dataset.hpp"
#include "pbdn/error.hpp"
#include "pbdn/ishm.hpp"
#include "pbdn/stack.hpp"

using namespace pbdn;

namespace {

IshmModel random_model(RngStream& rng, std::size_t dim, std::size_t k, bool flipped) {
  IshmModel m;
  m.input_dim = dim;
  m.label_flipped = flipped;
  for (std::size_t j = 0; j < k; ++j) {
    Hyperplane h;
    h.beta.resize(static_cast<Eigen::Index>(dim));
    for (auto& b : h.beta) b = rng.normal();
    h.weight = 0.1 + rng.uniform();
    m.hyperplanes.push_back(h);
  }
  return m;
}

IshmPair random_pair(RngStream& rng, std::size_t dim, std::size_t k_pos, std::size_t k_neg,
                     std::size_t layer) {
  IshmPair p;
  p.model_pos = random_model(rng, dim, k_pos, false);
  p.model_neg = random_model(rng, dim, k_neg, true);
  p.layer_index = layer;
  return p;
}

/// A full-concatenation stack over V covariates with the given pair splits.
PbdnStack random_stack(std::uint64_t seed, std::size_t v,
                       const std::vector<std::pair<std::size_t, std::size_t>>& splits) {
  RngStream rng(seed);
  PbdnStack s;
  s.layer_widths.push_back(v);
  std::size_t prev = 0;
  for (std::size_t t = 0; t < splits.size(); ++t) {
    const std::size_t dim = prev + s.layer_widths.back() + 1;
    s.pairs.push_back(random_pair(rng, dim, splits[t].first, splits[t].second, t + 1));
    prev = s.layer_widths.back();
    s.layer_widths.push_back(splits[t].first + splits[t].second);
  }
  s.selected_depth = s.pairs.size();
  return s;
}

Dataset blobs(std::uint64_t seed, double separation) {
  RngStream rng(seed);
  return standardize(make_gaussian_blobs(100, separation, 1.0, rng));
}

}  // namespace

TEST_CASE("propagate with zero coefficients gives ln 2 hidden units") {
  IshmPair p;
  p.model_pos.input_dim = 3;
  p.model_neg.input_dim = 3;
  p.model_pos.hyperplanes.assign(3, {Eigen::VectorXd::Zero(3), 1.0});
  p.model_neg.hyperplanes.assign(2, {Eigen::VectorXd::Zero(3), 1.0});
  const Eigen::Vector2d x(0.7, -1.3);
  Eigen::VectorXd x1(3);
  x1 << 1.0, x;
  const Eigen::VectorXd out = propagate(p, x1, x);
  REQUIRE(out.size() == 1 + 2 + 5);
  CHECK(out[0] == 1.0);
  CHECK(out[1] == 0.7);
  CHECK(out[2] == -1.3);
  for (Eigen::Index k = 3; k < 8; ++k) CHECK(out[k] == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(propagate(p, Eigen::VectorXd::Ones(4), x), DimensionError);
}

TEST_CASE("propagate orders the positive model's hyperplanes first") {
  RngStream rng(1);
  const IshmPair p = random_pair(rng, 3, 2, 3, 1);
  const Eigen::Vector3d x(1.0, 0.2, -0.4);
  const Eigen::VectorXd out = propagate(p, x, x.tail(2));
  REQUIRE(out.size() == 8);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(out[3 + Eigen::Index(k)] == doctest::Approx(softplus(p.model_pos.hyperplanes[k].beta.dot(x))));
  }
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(out[5 + Eigen::Index(k)] == doctest::Approx(softplus(p.model_neg.hyperplanes[k].beta.dot(x))));
  }
}

TEST_CASE("layer inputs follow the width bookkeeping") {
  const PbdnStack s = random_stack(2, 2, {{3, 2}, {4, 4}, {1, 2}});
  CHECK_NOTHROW(s.validate());
  RngStream rng(3);
  RowMatrix f(5, 3);
  for (Eigen::Index i = 0; i < 5; ++i) f.row(i) << 1.0, rng.normal(), rng.normal();
  const auto inputs = layer_inputs(s, f, 3);
  REQUIRE(inputs.size() == 3);
  CHECK(inputs[0] == f);
  CHECK(inputs[1].cols() == 1 + 2 + 5);
  CHECK(inputs[2].cols() == 1 + 5 + 8);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(std::size_t(inputs[t].cols()) == s.pairs[t].input_dim());
  }
  for (Eigen::Index i = 0; i < 5; ++i) {
    const Eigen::VectorXd x1 = f.row(i).transpose();
    const Eigen::VectorXd x2 = propagate(s.pairs[0], x1, x1.tail(2));
    const Eigen::VectorXd x3 = propagate(s.pairs[1], x2, x2.tail(5));
    CHECK((inputs[1].row(i).transpose() - x2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((inputs[2].row(i).transpose() - x3).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("alternative concatenations") {
  RowMatrix x(2, 3);
  x << 1, 2, 3, 1, 4, 5;
  RowMatrix tilde(2, 2);
  tilde << 2, 3, 4, 5;
  RowMatrix h(2, 1);
  h << 7, 8;
  RowMatrix full(2, 4);
  full << 1, 2, 3, 7, 1, 4, 5, 8;
  RowMatrix hidden(2, 2);
  hidden << 1, 7, 1, 8;
  RowMatrix cumulative(2, 4);
  cumulative << 1, 2, 3, 7, 1, 4, 5, 8;
  CHECK(next_layer_input(ConcatMode::full, x, tilde, h) == full);
  CHECK(next_layer_input(ConcatMode::hidden_only, x, tilde, h) == hidden);
  CHECK(next_layer_input(ConcatMode::cumulative, x, tilde, h) == cumulative);
  for (auto m : {ConcatMode::full, ConcatMode::hidden_only, ConcatMode::cumulative}) {
    CHECK(parse_concat_mode(to_string(m)) == m);
  }
  CHECK(parse_engine("sgd") == Engine::map);
  CHECK(parse_engine("gibbs") == Engine::gibbs);
  CHECK(parse_criterion("aic-eps") == Criterion::aic_eps);
  CHECK_THROWS(parse_criterion("bic"));
}

TEST_CASE("aic parameter cost by hand") {
  CHECK(aic_penalty({2, 8}, 1) == 64.0);
  CHECK(aic_penalty({2, 8, 14}, 2) == 2.0 * 3 * 8 + 2.0 * 9 * 14 + 2.0 * 14);
  // A deeper stack with the same likelihood costs more.
  for (std::size_t k : {1, 5, 20}) CHECK(aic_penalty({2, 8, k}, 2) > aic_penalty({2, 8, k}, 1));
  CHECK_THROWS_AS(aic_penalty({2}, 1), std::out_of_range);
}

TEST_CASE("aic combines the cost with both models' likelihood") {
  const PbdnStack s = random_stack(4, 2, {{3, 5}, {2, 2}});
  const Dataset data = blobs(5, 2.0);
  for (std::size_t depth : {1, 2}) {
    const auto inputs = layer_inputs(s, data.features, depth);
    double ll = 0.0;
    const IshmPair& p = s.pairs[depth - 1];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Eigen::VectorXd x = inputs.back().row(Eigen::Index(i)).transpose();
      ll +=
          log_likelihood(p.model_pos, x, data.labels[i]) + log_likelihood(p.model_neg, x, 1 - data.labels[i]);
    }
    CHECK(pair_log_likelihood(p, inputs.back(), data.labels) == doctest::Approx(ll).epsilon(1e-12));
    CHECK(aic(s, data, depth) ==
          doctest::Approx(aic_penalty(s.layer_widths, depth) - 2.0 * ll).epsilon(1e-12));
  }
  CHECK_THROWS_AS(aic(s, data, 0), std::out_of_range);
  CHECK_THROWS_AS(aic(s, data, 3), std::out_of_range);
}

TEST_CASE("thresholded counts") {
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(3, 4, 0.001);
  b(1, 2) = -5.0;
  CHECK(thresholded_count(b, 0.01) == 1);
  CHECK(thresholded_count(b, 1.0) == 0);
  CHECK(thresholded_count(b, 1e-12) == 12);
  CHECK(thresholded_count(Eigen::MatrixXd(3, 0), 0.5) == 0);
}

TEST_CASE("aic_eps reduces to aic for dense weights when each input has K_t + 1 entries") {
  const Dataset data = blobs(6, 2.0);
  const PbdnStack one = random_stack(7, 2, {{3, 5}});
  CHECK(aic_eps(one, data, 1, 1e-12) == doctest::Approx(aic(one, data, 1)).epsilon(1e-12));

  PbdnStack two = random_stack(8, 2, {{3, 5}});
  RngStream rng(9);
  two.concat = ConcatMode::hidden_only;
  two.pairs.push_back(random_pair(rng, 9, 2, 4, 2));
  two.layer_widths.push_back(6);
  two.selected_depth = 2;
  CHECK(aic_eps(two, data, 2, 1e-12) == doctest::Approx(aic(two, data, 2)).epsilon(1e-12));

  // With the full concatenation each matrix has more than K_t + 1 rows.
  const PbdnStack wide = random_stack(10, 2, {{3, 5}, {2, 2}});
  CHECK(aic_eps(wide, data, 2, 1e-12) > aic(wide, data, 2));
  CHECK_THROWS_AS(aic_eps(one, data, 1, 0.0), ParameterDomainError);
}

TEST_CASE("complexity counts hyperplane-equivalent inner products") {
  PbdnStack s = random_stack(11, 2, {{5, 3}});
  CHECK(complexity(s) == doctest::Approx(8.0));
  PbdnStack logistic = random_stack(12, 4, {{1, 0}});
  CHECK(complexity(logistic) == doctest::Approx(1.0));

  PbdnStack deep = random_stack(13, 2, {{5, 3}, {4, 4}, {2, 1}});
  double previous = 0.0;
  for (std::size_t d = 1; d <= 3; ++d) {
    deep.selected_depth = d;
    CHECK(complexity(deep) > previous);
    previous = complexity(deep);
  }
  CHECK(previous == doctest::Approx((3.0 * 8 + 11.0 * 8 + 17.0 * 3) / 3.0));
}

TEST_CASE("prediction at depth d ignores deeper pairs") {
  PbdnStack s = random_stack(14, 2, {{2, 3}, {3, 3}});
  const Dataset data = blobs(15, 3.0);
  const Eigen::VectorXd p1 = predict_proba(s, data.features, 1);
  const Eigen::VectorXd p2 = predict_proba(s, data.features, 2);
  RngStream rng(16);
  s.pairs.push_back(random_pair(rng, 1 + 5 + 6, 4, 1, 3));
  s.layer_widths.push_back(5);
  CHECK(predict_proba(s, data.features, 1) == p1);
  CHECK(predict_proba(s, data.features, 2) == p2);
  s.selected_depth = 2;
  CHECK(predict_proba(s, data.features) == p2);
  for (Eigen::Index i = 0; i < p1.size(); ++i) {
    CHECK(p1[i] == doctest::Approx(pair_prob_one(s.pairs[0], data.features.row(i).transpose())));
  }
}

TEST_CASE("predict applies the stored standardization") {
  RngStream rng(17);
  const Dataset raw = make_gaussian_blobs(50, 4.0, 1.0, rng);
  const Dataset data = standardize(raw);
  PbdnStack s = random_stack(18, 2, {{2, 2}});
  s.standardization = data.standardization;
  const Eigen::VectorXd probs = predict_proba(s, data.features);
  for (std::size_t i = 0; i < raw.size(); i += 7) {
    const Eigen::VectorXd cov = raw.row(i).tail(2).transpose();
    CHECK(predict(s, cov) == doctest::Approx(probs[Eigen::Index(i)]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(predict(s, Eigen::VectorXd::Zero(3)), DimensionError);
  CHECK(predict_label(0.5) == 0);
  CHECK(predict_label(std::nextafter(0.5, 1.0)) == 1);
}

TEST_CASE("stack validation") {
  PbdnStack s = random_stack(19, 2, {{2, 2}});
  CHECK_NOTHROW(s.validate());
  s.layer_widths[1] = 5;
  CHECK_THROWS_AS(s.validate(), DimensionError);
  s = random_stack(19, 2, {{2, 2}});
  s.selected_depth = 2;
  CHECK_THROWS_AS(s.validate(), DimensionError);
  StackConfig cfg;
  cfg.max_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterDomainError);
}

TEST_CASE("grow with one layer selects depth one") {
  const Dataset data = blobs(20, 4.0);
  StackConfig cfg;
  cfg.max_layers = 1;
  cfg.map.num_batches = 500;
  cfg.seed = 3;
  const GrowResult r = grow(data, IshmHyperparams::map_defaults(), cfg);
  CHECK(r.stack.depth() == 1);
  CHECK(r.stack.selected_depth == 1);
  CHECK(r.stack.criterion_trace.size() == 1);
  CHECK_NOTHROW(r.stack.validate());
  CHECK(r.stack.pairs[0].model_neg.label_flipped);
  CHECK_FALSE(r.stack.pairs[0].model_pos.label_flipped);
}

TEST_CASE("grow keeps width bookkeeping and freezes earlier layers") {
  RngStream rng(21);
  const Dataset data = standardize(make_two_spirals(100, 0.02, 1.0, rng));
  StackConfig cfg;
  cfg.max_layers = 3;
  cfg.force_all_layers = true;
  cfg.map.num_batches = 600;
  cfg.seed = 5;
  const GrowResult deep = grow(data, IshmHyperparams::map_defaults(), cfg);
  const PbdnStack& s = deep.stack;
  REQUIRE(s.depth() == 3);
  CHECK_NOTHROW(s.validate());
  CHECK(s.layer_widths[0] == 2);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(s.layer_widths[t + 1] == s.pairs[t].model_pos.size() + s.pairs[t].model_neg.size());
    const std::size_t prev = t == 0 ? 0 : s.layer_widths[t - 1];
    CHECK(s.pairs[t].input_dim() == prev + s.layer_widths[t] + 1);
    CHECK(s.criterion_trace[t].value == doctest::Approx(aic(s, data, t + 1)));
  }
  for (std::size_t t = 1; t < s.selected_depth; ++t) {
    CHECK(s.criterion_trace[t].value < s.criterion_trace[t - 1].value);
  }
  if (s.selected_depth < s.depth()) {
    CHECK(s.criterion_trace[s.selected_depth].value >= s.criterion_trace[s.selected_depth - 1].value);
  }

  cfg.max_layers = 2;
  const GrowResult shallow = grow(data, IshmHyperparams::map_defaults(), cfg);
  REQUIRE(shallow.stack.depth() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(shallow.stack.pairs[t].model_pos.beta_matrix() == s.pairs[t].model_pos.beta_matrix());
    CHECK(shallow.stack.pairs[t].model_neg.weights() == s.pairs[t].model_neg.weights());
  }
}

TEST_CASE("grow stops at the first rise of the criterion") {
  RngStream rng(22);
  const Dataset data = standardize(make_two_spirals(100, 0.02, 1.0, rng));
  StackConfig cfg;
  cfg.max_layers = 6;
  cfg.map.num_batches = 600;
  cfg.seed = 6;
  const GrowResult r = grow(data, IshmHyperparams::map_defaults(), cfg);
  const PbdnStack& s = r.stack;
  CHECK(s.selected_depth >= 1);
  CHECK((s.depth() == s.selected_depth || s.depth() == s.selected_depth + 1));
  if (s.depth() == s.selected_depth + 1) {
    CHECK(s.criterion_trace.back().value >= s.criterion_trace[s.selected_depth - 1].value);
  } else {
    CHECK(s.depth() == cfg.max_layers);
  }
}

TEST_CASE("grow with the Gibbs engine and aic_eps") {
  const Dataset data = blobs(23, 5.0);
  StackConfig cfg;
  cfg.engine = Engine::gibbs;
  cfg.criterion = Criterion::aic_eps;
  cfg.gibbs.iterations = 200;
  cfg.max_layers = 2;
  cfg.seed = 7;
  const GrowResult r = grow(data, IshmHyperparams::gibbs_defaults(), cfg);
  CHECK_NOTHROW(r.stack.validate());
  CHECK(r.stack.criterion_trace.front().value == doctest::Approx(aic_eps(r.stack, data, 1, cfg.epsilon)));
  const GrowResult again = grow(data, IshmHyperparams::gibbs_defaults(), cfg);
  CHECK(again.stack.pairs[0].model_pos.beta_matrix() == r.stack.pairs[0].model_pos.beta_matrix());
}
