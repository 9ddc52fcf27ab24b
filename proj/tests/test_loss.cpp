#include <cmath>
#include <random>

#include "distillrank/error.hpp"
#include "distillrank/loss.hpp"
#include "doctest.h"

using namespace distillrank;

namespace {

LabelDistribution dist(std::vector<double> w) { return LabelDistribution::from_weights(w); }

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<double> s(n);
  for (auto& v : s) v = normal(rng);
  return s;
}

}  // namespace

TEST_CASE("softmax hand values") {
  const std::vector<double> zero{0.0, 0.0};
  auto p = listwise_softmax(zero, 1.0);
  CHECK(p[0] == doctest::Approx(0.5));
  const std::vector<double> s{std::log(3.0), 0.0};
  p = listwise_softmax(s, 1.0);
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("softmax temperature limit and invariants") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto s = random_scores(rng, 2 + t % 9);
    for (double T : {0.05, 0.5, 1.0, 7.0, 1e6}) {
      const auto p = listwise_softmax(s, T);
      double sum = 0.0;
      for (double v : p.values()) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-9);
      const auto arg_s = std::max_element(s.begin(), s.end()) - s.begin();
      const auto arg_p = std::max_element(p.values().begin(), p.values().end()) - p.values().begin();
      if (T < 1e6) CHECK(arg_s == arg_p);
      if (T == 1e6) {
        for (double v : p.values()) CHECK(std::abs(v - 1.0 / s.size()) < 1e-5);
      }
    }
  }
}

TEST_CASE("softmax rejects bad input") {
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(listwise_softmax(bad, 1.0), InputError);
  const std::vector<double> ok{1.0, 2.0};
  CHECK_THROWS_AS(listwise_softmax(ok, 0.0), InputError);
}

TEST_CASE("cross entropy hand values") {
  CHECK(cross_entropy(dist({0.5, 0.5}), dist({1, 0})) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(cross_entropy(dist({0.75, 0.25}), dist({0.5, 0.5})) == doctest::Approx(0.836988).epsilon(1e-6));
  const double eps = 1e-3;
  const auto t = dist({1 - eps, eps});
  const double entropy = -(1 - eps) * std::log(1 - eps) - eps * std::log(eps);
  CHECK(cross_entropy(t, t) == doctest::Approx(entropy).epsilon(1e-14));
  CHECK(cross_entropy(dist({0.6, 0.4}), t) > entropy);
  CHECK_THROWS_AS(cross_entropy(dist({1, 1, 1}), t), InputError);
}

TEST_CASE("label distribution validation") {
  CHECK_THROWS_AS(dist({0, 0}), InputError);
  CHECK_THROWS_AS(dist({1, -1}), InputError);
  CHECK_THROWS_AS(LabelDistribution::from_probabilities({0.5, 0.6}), InputError);
  CHECK(dist({1, 3})[1] == doctest::Approx(0.75));
}

TEST_CASE("distill loss hand example") {
  const std::vector<double> z{0.0, 0.0};
  const auto r = distill_loss(z, dist({1, 0}), dist({0.5, 0.5}), 0.2, 1.0);
  CHECK(r.loss == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(r.grad[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(r.grad[1] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("distill loss degenerate alphas are exact") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto z = random_scores(rng, 6);
    const auto hard = dist({0, 0, 1, 0, 0, 0});
    const auto soft = listwise_softmax(random_scores(rng, 6), 1.0);
    const auto a1 = distill_loss(z, hard, soft, 1.0, 2.0);
    const auto h = listwise_ce(z, hard);
    CHECK(a1.loss == h.loss);
    CHECK(a1.grad == h.grad);
    const auto a0 = distill_loss(z, hard, soft, 0.0, 2.0);
    const auto s = listwise_ce(z, soft, 2.0);
    CHECK(a0.loss == s.loss);
    CHECK(a0.grad == s.grad);
  }
  const std::vector<double> z{0.0, 1.0};
  CHECK_THROWS_AS(distill_loss(z, dist({1, 0}), dist({1, 1}), 1.5, 1.0), ConfigError);
  CHECK_THROWS_AS(distill_loss(z, dist({1, 0}), dist({1, 1}), -0.1, 1.0), ConfigError);
}

TEST_CASE("distill gradient matches finite differences") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    auto z = random_scores(rng, 7);
    const auto hard = dist({0, 1, 0, 0, 0, 0, 0});
    const auto soft = listwise_softmax(random_scores(rng, 7), 1.0);
    const double alpha = 0.3;
    const double T = 1.7;
    const auto r = distill_loss(z, hard, soft, alpha, T);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double h = 1e-6;
      auto zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double fd =
          (distill_loss(zp, hard, soft, alpha, T).loss - distill_loss(zm, hard, soft, alpha, T).loss) / (2 * h);
      CHECK(r.grad[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("combined label equals two-term loss") {
  // alpha*CE(p, l) + (1-alpha)*CE(p, s) = CE(p, alpha*l + (1-alpha)*s) at T = 1.
  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const auto z = random_scores(rng, 5);
    const auto hard = dist({0, 0, 0, 1, 0});
    const auto soft = listwise_softmax(random_scores(rng, 5), 1.0);
    const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::vector<double> mixed(5);
    for (std::size_t i = 0; i < 5; ++i) mixed[i] = alpha * hard[i] + (1 - alpha) * soft[i];
    const double combined = listwise_ce(z, dist(mixed)).loss;
    CHECK(std::abs(distill_loss(z, hard, soft, alpha, 1.0).loss - combined) < 1e-9);
  }
}

TEST_CASE("weighted CE sum") {
  const auto p = dist({0.2, 0.3, 0.5});
  const auto a = dist({1, 0, 0});
  const auto b = dist({0, 1, 1});
  const std::vector<LabelDistribution> one{a};
  const std::vector<double> w1{1.0};
  CHECK(weighted_ce_sum(p, one, w1) == cross_entropy(p, a));
  const std::vector<LabelDistribution> two{a, b};
  const std::vector<double> half{0.5, 0.5};
  std::vector<double> avg(3);
  for (std::size_t i = 0; i < 3; ++i) avg[i] = 0.5 * a[i] + 0.5 * b[i];
  CHECK(std::abs(weighted_ce_sum(p, two, half) - cross_entropy(p, dist(avg))) < 1e-9);
  const std::vector<double> zero{0.0, 0.0};
  CHECK(weighted_ce_sum(p, two, zero) == 0.0);
  CHECK_THROWS_AS(weighted_ce_sum(p, two, w1), InputError);
}
