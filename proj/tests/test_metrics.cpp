#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "distillrank/error.hpp"
#include "distillrank/metrics.hpp"
#include "doctest.h"

using namespace distillrank;

namespace {

using Bytes = std::vector<std::uint8_t>;

// Pair-count tau on positions, independent of the library's permutation check.
double tau_oracle(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  const std::size_t n = a.size();
  long long c = 0, d = 0;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      if (x == y) continue;
      const auto pa = std::find(a.begin(), a.end(), x) < std::find(a.begin(), a.end(), y);
      const auto pb = std::find(b.begin(), b.end(), x) < std::find(b.begin(), b.end(), y);
      if (pa && pb) ++c;
      if (pa && !pb) ++d;
    }
  }
  return static_cast<double>(c - d) / (static_cast<double>(n * (n - 1)) / 2.0);
}

}  // namespace

TEST_CASE("ranking order breaks ties by index") {
  const std::vector<double> s{1.0, 3.0, 1.0, 3.0};
  CHECK(ranking_order(s) == std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("ndcg hand values") {
  const std::vector<double> s{0.9, 0.5, 0.1};
  CHECK(ndcg_at_k(s, Bytes{0, 1, 0}, 3) == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-14));
  CHECK(ndcg_at_k(s, Bytes{1, 0, 0}, 1) == 1.0);
  CHECK(ndcg_at_k(s, Bytes{0, 0, 1}, 2) == 0.0);
  CHECK(ndcg_at_k(s, Bytes{0, 0, 0}, 3) == 0.0);
  // Two relevant items, perfect ranking of one and the other at rank 3.
  const double want = (1.0 + 0.5) / (1.0 + 1.0 / std::log2(3.0));
  CHECK(ndcg_at_k(s, Bytes{1, 0, 1}, 3) == doctest::Approx(want).epsilon(1e-14));
  CHECK_THROWS_AS(ndcg_at_k(s, Bytes{1, 0, 0}, 0), InputError);
  CHECK_THROWS_AS(ndcg_at_k(s, Bytes{1, 0}, 2), InputError);
  // k beyond n truncates to n.
  CHECK(ndcg_at_k(s, Bytes{0, 1, 0}, 50) == ndcg_at_k(s, Bytes{0, 1, 0}, 3));
}

TEST_CASE("exposure rate") {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.1};
  const Bytes flags{0, 0, 1, 0};
  CHECK(exposure_rate(s, flags, 2) == 0.0);
  CHECK(exposure_rate(s, flags, 3) == doctest::Approx(1.0 / 3.0));
  CHECK(exposure_rate(s, flags, 10) == 0.25);
  CHECK(exposure_rate(s, flags, 0) == 0.0);
}

TEST_CASE("serving boost adds gamma to matching items") {
  QueryGroup g;
  g.items = {Item{{0, 0}, 4.8, false, 1}, Item{{0, 0}, 3.0, false, 2}};
  g.labels = {{Label{0}}, {Label{0}}};
  const std::vector<double> s{1.0, 2.5};
  const BoostRule rule{BoostPredicate::kRatingAtLeast, 4.5, 9.0};
  CHECK(apply_serving_boost(s, g, rule, 1.0) == std::vector<double>{2.0, 2.5});
  CHECK(apply_serving_boost(s, g, rule, 0.0) == s);
  const std::vector<double> short_scores{1.0};
  CHECK_THROWS_AS(apply_serving_boost(short_scores, g, rule, 1.0), InputError);
}

TEST_CASE("kendall tau hand values and properties") {
  const std::vector<std::size_t> id{0, 1, 2}, swap{1, 0, 2}, rev{2, 1, 0};
  CHECK(kendall_tau(id, swap) == doctest::Approx(1.0 / 3.0));
  CHECK(kendall_tau(id, rev) == -1.0);
  CHECK(kendall_tau(id, id) == 1.0);
  CHECK(kendall_tau(swap, rev) == kendall_tau(rev, swap));
  const std::vector<std::size_t> dup{0, 0, 2};
  CHECK_THROWS_AS(kendall_tau(id, dup), InputError);

  std::vector<std::size_t> a{0, 1, 2, 3, 4};
  do {
    std::vector<std::size_t> b{0, 1, 2, 3, 4};
    do {
      CHECK(kendall_tau(a, b) == doctest::Approx(tau_oracle(a, b)).epsilon(1e-15));
    } while (std::next_permutation(b.begin(), b.end()));
  } while (std::next_permutation(a.begin(), a.end()) && a[0] < 2);
}

TEST_CASE("prediction difference") {
  CHECK(prediction_difference(std::vector<double>{1.0}, std::vector<double>{3.0}) == 1.0);
  CHECK(prediction_difference(std::vector<double>{1.0, 2.0}, std::vector<double>{3.0, 2.0}) == 0.5);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(6), b(6);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    CHECK(prediction_difference(a, a) == 0.0);
    CHECK(prediction_difference(a, b) == prediction_difference(b, a));
    auto a2 = a, b2 = b;
    for (auto& v : a2) v *= 3.5;
    for (auto& v : b2) v *= 3.5;
    CHECK(prediction_difference(a2, b2) == doctest::Approx(prediction_difference(a, b)).epsilon(1e-12));
    CHECK(prediction_difference(a, b) <= 2.0);
  }
  CHECK_THROWS_AS(prediction_difference(std::vector<double>{0.0}, std::vector<double>{1.0}), InputError);
  CHECK_THROWS_AS(prediction_difference(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), InputError);
}

TEST_CASE("side by side comparison") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> a, b, reversed;
  for (int q = 0; q < 50; ++q) {
    std::vector<double> s(10), t(10);
    for (auto& v : s) v = normal(rng);
    for (auto& v : t) v = normal(rng);
    a.push_back(s);
    b.push_back(t);
    for (auto& v : s) v = -v;
    reversed.push_back(s);
  }
  const auto same = sxs_compare(a, a);
  CHECK(same.change_rate == 0.0);
  CHECK(same.pd == 0.0);
  CHECK(same.mean_tau == 1.0);
  CHECK(same.queries == 50);
  const auto rev = sxs_compare(a, reversed);
  CHECK(rev.change_rate == 1.0);
  CHECK(rev.mean_tau == -1.0);
  CHECK(sxs_compare(a, b, 1.0).change_rate == 0.0);
  double prev = 2.0;
  for (double th : {0.0, 0.1, 0.2, 0.3, 0.5, 0.8}) {
    const double cr = sxs_compare(a, b, th).change_rate;
    CHECK(cr <= prev);
    prev = cr;
  }
  const auto ab = sxs_compare(a, b), ba = sxs_compare(b, a);
  CHECK(ab.change_rate == ba.change_rate);
  CHECK(ab.pd == doctest::Approx(ba.pd).epsilon(1e-14));
  // Depth restriction only looks at the heads of both rankings.
  auto tail_swap = a;
  for (auto& s : tail_swap) {
    const auto order = ranking_order(s);
    std::swap(s[order[8]], s[order[9]]);
  }
  CHECK(sxs_compare(a, tail_swap, 0.0, 3).change_rate == 0.0);
  CHECK(sxs_compare(a, tail_swap, 0.0, 0).change_rate == 1.0);
  CHECK_THROWS_AS(sxs_compare({}, {}), InputError);
  CHECK_THROWS_AS(sxs_compare(a, std::vector<std::vector<double>>(a.begin(), a.begin() + 3)), InputError);
}

TEST_CASE("evaluate ranking aggregates per-query metrics") {
  GeneratorConfig g;
  g.num_queries = 200;
  g.seed = 8;
  const auto ds = generate_dataset(g);
  const auto resolved = g.resolved();
  std::vector<std::vector<double>> scores;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& grp : ds.groups) {
    std::vector<double> s(grp.size());
    for (auto& v : s) v = normal(rng);
    scores.push_back(s);
  }
  EvalOptions opts;
  opts.generator = &resolved;
  opts.boost_rule = BoostRule{BoostPredicate::kRatingAtLeast, 4.5, 1.0};
  const auto rep = evaluate_ranking(scores, ds, opts);
  CHECK(rep.total_queries == 200);
  CHECK(rep.per_query.size() == 200);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.groups.size(); ++i) {
    const auto labels = ds.groups[i].binary_labels(0);
    if (std::none_of(labels.begin(), labels.end(), [](auto v) { return v != 0; })) continue;
    sum += ndcg_at_k(scores[i], labels, 10);
    ++n;
  }
  CHECK(rep.query_count == n);
  CHECK(rep.ndcg10 == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-12));
  CHECK(rep.objective_exposure.size() == 3);
  CHECK(rep.boosted_exposure > 0.0);
  EvalOptions plain;
  CHECK(evaluate_ranking(scores, ds, plain).objective_exposure.empty());
  scores.pop_back();
  CHECK_THROWS_AS(evaluate_ranking(scores, ds, plain), InputError);
}

TEST_CASE("compensated sum") {
  const std::vector<double> v{1.0, 1e100, 1.0, -1e100};
  CHECK(compensated_sum(v) == 2.0);
  CHECK(compensated_sum(std::vector<double>{}) == 0.0);
}
