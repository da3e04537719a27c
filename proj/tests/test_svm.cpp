// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "layerprobe/svm.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace layerprobe;
using testutil::catch_error;

namespace {

SvmProblem random_problem(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<float> g;
  SvmProblem p;
  std::vector<float> x(n * d);
  for (auto& v : x) v = g(rng);
  p.x = FeatureMatrix(n, d, std::move(x));
  p.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.y[i] = (rng() & 1) ? 1 : -1;
  p.y[0] = 1;
  p.y[1] = -1;
  p.seed = rng();
  return p;
}

}  // namespace

TEST_CASE("two-point analytic problem") {
  SvmProblem p;
  p.x = FeatureMatrix(2, 2, {1, 0, -1, 0});
  p.y = {1, -1};
  p.bias_scale = 0.0;
  p.eps = 1e-9;
  const auto m = train_dcd(p);
  CHECK(std::abs(m.w[0] - 1.0) <= 1e-6);
  CHECK(std::abs(m.w[1]) <= 1e-6);
  CHECK(m.b == 0.0f);
  CHECK(decision_value(m, p.x.row(0)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(decision_value(m, p.x.row(1)) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(m.meta.converged);

  // Grid search over the box confirms s = a1 + a2 = 1 maximises s - s^2/2,
  // which gives w = (a1 + a2) * (1, 0).
  double best = 1e300, best_s = -1.0;
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; j <= 200; ++j) {
      const std::vector<double> a{i / 200.0, j / 200.0};
      const double obj = oracle::dual_objective(p, a);
      if (obj < best) best = obj, best_s = a[0] + a[1];
    }
  CHECK(best_s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decision value and prediction") {
  SvmModel m{{1.0f, 0.0f}, 0.0f, {}};
  CHECK(decision_value(m, std::vector<float>{1, 0}) == 1.0);
  SvmModel zero{{0.0f, 0.0f, 0.0f}, 0.0f, {}};
  CHECK(decision_value(zero, std::vector<float>{3, -2, 7}) == 0.0);

  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  SvmModel r{{g(rng), g(rng), g(rng)}, g(rng), {}};
  const std::vector<float> a{g(rng), g(rng), g(rng)}, b{g(rng), g(rng), g(rng)};
  std::vector<float> ab(3);
  for (int i = 0; i < 3; ++i) ab[i] = a[i] + b[i];
  CHECK(std::abs(decision_value(r, ab) - (decision_value(r, a) + decision_value(r, b) - r.b)) <= 1e-6);

  SvmModel fixed{{1.0f}, 0.0f, {}};
  CHECK(predict(fixed, std::vector<float>{1.0f}) == 1);
  CHECK(predict(fixed, std::vector<float>{-0.2f}) == -1);
  CHECK(predict(fixed, std::vector<float>{0.0f}) == 1);
  CHECK(catch_error([&] { decision_value(fixed, std::vector<float>{1, 2}); }).code == Errc::DimMismatch);
}

TEST_CASE("matches the brute-force dual oracle") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    SvmProblem p = random_problem(rng, 2 + rng() % 4, 2);
    p.C = 0.5;
    p.eps = 1e-7;
    p.weight_pos = 1.0 + (rng() % 3);
    const auto m = train_dcd(p);
    REQUIRE(m.meta.converged);
    const auto sol = oracle::solve_dual(p);
    for (std::size_t i = 0; i < p.x.rows(); ++i)
      CHECK(std::abs(decision_value(m, p.x.row(i)) - oracle::oracle_decision(p, sol, p.x.row(i))) <= 1e-3);
  }
}

TEST_CASE("label flip negates the model exactly") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    SvmProblem p = random_problem(rng, 30, 4);
    SvmProblem q = p;
    for (auto& y : q.y) y = static_cast<std::int8_t>(-y);
    const auto a = train_dcd(p), b = train_dcd(q);
    for (std::size_t k = 0; k < a.w.size(); ++k) CHECK(a.w[k] == -b.w[k]);
    CHECK(a.b == -b.b);
    CHECK(a.meta.sweeps_used == b.meta.sweeps_used);
  }
}

TEST_CASE("KKT conditions, feasibility and monotone dual objective") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 15; ++t) {
    SvmProblem p = random_problem(rng, 6 + rng() % 10, 3);
    p.C = 0.1 + 0.4 * (rng() % 5);
    p.eps = 1e-3;
    p.weight_neg = 0.5 + (rng() % 4) * 0.5;
    // Alpha after the last coordinate update (all zero when nothing moved).
    std::vector<double> alpha(p.y.size(), 0.0);
    double prev_obj = 0.0;
    bool monotone = true, feasible = true;
    const auto m = train_dcd(p, [&](const DcdStep& s) {
      alpha.assign(s.alpha.begin(), s.alpha.end());
      for (std::size_t i = 0; i < s.alpha.size(); ++i)
        feasible = feasible && s.alpha[i] >= 0.0 && s.alpha[i] <= s.upper[i];
      const double obj = oracle::dual_objective(p, alpha);
      monotone = monotone && obj <= prev_obj + 1e-12;
      prev_obj = obj;
    });
    CHECK(feasible);
    CHECK(monotone);
    REQUIRE(m.meta.converged);

    // Rebuild w from alpha and check every coordinate's projected gradient.
    const auto n = p.y.size();
    std::vector<double> w(p.x.cols() + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = oracle::augmented(p, i);
      for (std::size_t k = 0; k < xi.size(); ++k) w[k] += alpha[i] * p.y[i] * xi[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = oracle::augmented(p, i);
      double dot = 0.0;
      for (std::size_t k = 0; k < xi.size(); ++k) dot += w[k] * xi[k];
      const double g = p.y[i] * dot - 1.0;
      const double upper = p.C * (p.y[i] == 1 ? p.weight_pos : p.weight_neg);
      if (alpha[i] <= 0.0) {
        CHECK(g >= -p.eps - 1e-9);
      } else if (alpha[i] >= upper) {
        CHECK(g <= p.eps + 1e-9);
      } else {
        CHECK(std::abs(g) <= p.eps + 1e-9);
      }
    }
  }
}

TEST_CASE("determinism and non-convergence reporting") {
  std::mt19937_64 rng(5);
  SvmProblem p = random_problem(rng, 200, 8);
  const auto a = train_dcd(p), b = train_dcd(p);
  CHECK(a.w == b.w);
  CHECK(a.b == b.b);
  CHECK(a.meta.sweeps_used == b.meta.sweeps_used);

  p.eps = 1e-12;
  p.max_sweeps = 2;
  p.C = 100.0;
  const auto c = train_dcd(p);
  CHECK_FALSE(c.meta.converged);
  CHECK(c.meta.sweeps_used == 2);
  CHECK(c.meta.final_violation > 0.0);
}

TEST_CASE("problem validation") {
  SvmProblem p;
  p.x = FeatureMatrix(3, 1, {1, 2, 3});
  p.y = {1, 1, 1};
  CHECK(catch_error([&] { train_dcd(p); }).code == Errc::SingleClass);
  CHECK(catch_error([&] { inverse_prevalence_weights(p.y); }).code == Errc::SingleClass);
  p.y = {1, -1, 1};
  p.x = FeatureMatrix(3, 1, {1, std::nanf(""), 3});
  CHECK(catch_error([&] { train_dcd(p); }).code == Errc::NonFiniteFeature);
  p.x = FeatureMatrix(3, 1, {1, 2, 3});
  p.C = 0.0;
  CHECK(catch_error([&] { train_dcd(p); }).code == Errc::InvalidArgument);

  const std::vector<std::int8_t> y{1, -1, -1, -1};
  const auto [wp, wn] = inverse_prevalence_weights(y);
  CHECK(wp == 2.0);
  CHECK(wn == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("SVM model file") {
  std::mt19937_64 rng(6);
  SvmProblem p = random_problem(rng, 40, 5);
  SvmModelFile f{train_dcd(p), RepKind::FC1, "Wearing_Hat"};
  const Bytes enc = encode_svm_model(f);
  const auto back = decode_svm_model(enc);
  CHECK(back.model.w == f.model.w);
  CHECK(back.model.b == f.model.b);
  CHECK(back.model.meta.C == f.model.meta.C);
  CHECK(back.kind == RepKind::FC1);
  CHECK(back.attribute == "Wearing_Hat");
  CHECK(encode_svm_model(back) == enc);

  const std::string head(enc.begin(), enc.begin() + 6);
  CHECK(head == "svm d=");
  Bytes cut(enc.begin(), enc.end() - 2);
  const auto c = catch_error([&] { decode_svm_model(cut); });
  CHECK(c.code == Errc::TruncatedFile);
  CHECK(c.message.find("offset") != std::string::npos);
  Bytes bad = enc;
  bad[0] = 'x';
  CHECK(catch_error([&] { decode_svm_model(bad); }).code == Errc::BadHeader);
  f.attribute = "two words";
  CHECK(catch_error([&] { encode_svm_model(f); }).code == Errc::InvalidArgument);
}
