#include <filesystem>
#include <fstream>
#include <sstream>

#include "distillrank/data.hpp"
#include "distillrank/error.hpp"
#include "doctest.h"

using namespace distillrank;

namespace {

GeneratorConfig small(std::size_t queries = 300, std::uint64_t seed = 4) {
  GeneratorConfig g;
  g.num_queries = queries;
  g.seed = seed;
  return g;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("generated dataset satisfies its invariants") {
  const auto ds = generate_dataset(small());
  ds.validate();
  CHECK(ds.groups.size() == 300);
  CHECK(ds.K == 3);
  CHECK(ds.objectives[0].primary);
  CHECK(ds.objectives[1].polarity == Polarity::kCost);
  for (const auto& g : ds.groups) {
    CHECK(g.size() >= 8);
    CHECK(g.size() <= 12);
    std::size_t positives = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      positives += g.labels[p][0] == Label{1} ? 1 : 0;
      const auto& it = g.items[p];
      if (it.is_new) {
        CHECK(it.features[kRatingFeature] == kMissingFeature);
        CHECK(it.features[kReviewCountFeature] == kMissingFeature);
        CHECK(it.review_rating == 0.0);
      }
      // Secondary labels only on the booked item.
      for (std::size_t k = 1; k < ds.K; ++k) {
        if (g.labels[p][k]) CHECK(g.labels[p][0] == Label{1});
      }
    }
    CHECK(positives <= 1);
  }
}

TEST_CASE("generator is deterministic per seed") {
  CHECK(serialize_dataset(generate_dataset(small())) == serialize_dataset(generate_dataset(small())));
  CHECK(dataset_hash(generate_dataset(small())) != dataset_hash(generate_dataset(small(300, 5))));
}

TEST_CASE("coverage follows booking and label rates") {
  auto g = small(10000);
  const auto ds = generate_dataset(g);
  const double primary = label_coverage(ds, 0);
  CHECK(primary == doctest::Approx(g.booking_rate).epsilon(0.05));
  for (std::size_t k = 1; k < 3; ++k) {
    const double ratio = primary / label_coverage(ds, k);
    CHECK(ratio > 10.0 * 0.8);
    CHECK(ratio < 10.0 * 1.2);
  }
  g.label_rates = {1.0, 0.5};
  const auto full = generate_dataset(g);
  CHECK(label_coverage(full, 1) == label_coverage(full, 0));
  CHECK(label_coverage(full, 0) / label_coverage(full, 2) < 10.0 * 0.8);
}

TEST_CASE("imbalance ratio decreases with label rate") {
  double prev = 1e9;
  for (double rate : {0.05, 0.1, 0.3, 0.7}) {
    auto g = small(4000);
    g.label_rates = {rate, rate};
    const auto ds = generate_dataset(g);
    const double ratio = label_coverage(ds, 0) / label_coverage(ds, 1);
    CHECK(ratio < prev);
    prev = ratio;
  }
}

TEST_CASE("correlation one with shared weights ranks every objective alike") {
  auto g = small(50);
  g.objective_correlation = 1.0;
  const auto r = g.resolved();
  for (const auto& grp : generate_dataset(g).groups) {
    const auto f0 = objective_favorability(r, grp, 0);
    for (std::size_t k = 1; k < 3; ++k) {
      const auto fk = objective_favorability(r, grp, k);
      for (std::size_t a = 0; a < grp.size(); ++a) {
        for (std::size_t b = 0; b < grp.size(); ++b) CHECK((f0[a] < f0[b]) == (fk[a] < fk[b]));
      }
    }
  }
}

TEST_CASE("objective targets flip cost labels") {
  Dataset ds;
  ds.m = 2;
  ds.K = 2;
  ds.objectives = {{0, "booking", Polarity::kReward, true}, {1, "cancel", Polarity::kCost, false}};
  QueryGroup g;
  g.items = {Item{{0, 0}, 4.0, false, 1}, Item{{0, 0}, 4.0, false, 2}, Item{{0, 0}, 4.0, false, 3}};
  g.labels = {{Label{1}, Label{0}}, {Label{0}, std::nullopt}, {Label{0}, Label{1}}};
  ds.groups.push_back(g);
  const auto t0 = objective_target(ds, g, 0);
  REQUIRE(t0);
  CHECK((*t0)[0] == 1.0);
  const auto t1 = objective_target(ds, g, 1);
  REQUIRE(t1);
  CHECK((*t1)[0] == 1.0);  // not cancelled
  CHECK((*t1)[2] == 0.0);
  g.labels = {{Label{0}, Label{1}}, {Label{0}, std::nullopt}, {Label{0}, std::nullopt}};
  CHECK_FALSE(objective_target(ds, g, 0));
  CHECK_FALSE(objective_target(ds, g, 1));
}

TEST_CASE("dataset round trip through JSON lines") {
  const auto ds = generate_dataset(small(120));
  std::stringstream buf;
  write_dataset(ds, buf);
  CHECK(count_lines(buf.str()) == 121);
  const auto back = read_dataset(buf);
  CHECK(back == ds);

  const auto path = (std::filesystem::temp_directory_path() / "distillrank_test_ds.jsonl").string();
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
  std::filesystem::remove(path);
}

TEST_CASE("loader reports the failing line") {
  const auto ds = generate_dataset(small(5));
  const std::string text = serialize_dataset(ds);
  // Cut the fourth line (third group) in half.
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) pos = text.find('\n', pos) + 1;
  std::stringstream truncated(text.substr(0, pos + 40));
  try {
    read_dataset(truncated);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::stringstream empty("");
  CHECK_THROWS_AS(read_dataset(empty), ParseError);
  std::stringstream no_header(text.substr(text.find('\n') + 1));
  CHECK_THROWS_AS(read_dataset(no_header), ParseError);
  std::stringstream header_only(text.substr(0, text.find('\n') + 1));
  const auto h = read_dataset(header_only);
  CHECK(h.groups.empty());
  CHECK(h.objectives == ds.objectives);
}

TEST_CASE("split by time") {
  const auto ds = generate_dataset(small(200));
  const auto [a, b] = split_by_time(ds, 5);
  CHECK(a.groups.size() + b.groups.size() == 200);
  for (const auto& g : a.groups) CHECK(g.timestamp < 5);
  for (const auto& g : b.groups) CHECK(g.timestamp >= 5);
  CHECK(a.groups.size() == 100);
  CHECK(a.objectives == ds.objectives);
  CHECK(split_by_time(ds, 0).first.groups.empty());
  CHECK(split_by_time(ds, 100).second.groups.empty());
  CHECK_THROWS_AS(split_by_time(Dataset{ds.objectives, {}, ds.m, ds.K}, 3), InputError);
  CHECK(select_days(ds, 2, 4).groups.size() == 40);
}

TEST_CASE("label coverage edge cases") {
  const auto ds = generate_dataset(small(10));
  CHECK(label_coverage(Dataset{ds.objectives, {}, ds.m, ds.K}, 0) == 0.0);
  CHECK_THROWS_AS(label_coverage(ds, 3), InputError);
}

TEST_CASE("generator config validation") {
  auto g = small();
  g.items_min = 1;
  CHECK_THROWS_AS(generate_dataset(g), ConfigError);
  g = small();
  g.label_rates = {0.1};
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = small();
  g.objective_correlation = 1.5;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = small();
  g.K = 1;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("validate rejects two bookings in one query") {
  auto ds = generate_dataset(small(3));
  auto& g = ds.groups[0];
  g.labels[0][0] = Label{1};
  g.labels[1][0] = Label{1};
  CHECK_THROWS_AS(ds.validate(), InputError);
}
