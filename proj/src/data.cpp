#include "distillrank/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "distillrank/error.hpp"

namespace distillrank {

const char* polarity_name(Polarity p) { return p == Polarity::kReward ? "reward" : "cost"; }

Polarity parse_polarity(std::string_view name) {
  if (name == "reward") return Polarity::kReward;
  if (name == "cost") return Polarity::kCost;
  throw ConfigError("unknown polarity '" + std::string(name) + "'");
}

Matrix QueryGroup::feature_matrix() const {
  const std::size_t m = items.empty() ? 0 : items.front().features.size();
  Matrix x(items.size(), m);
  for (std::size_t r = 0; r < items.size(); ++r) {
    std::copy(items[r].features.begin(), items[r].features.end(), x.data.begin() + r * m);
  }
  return x;
}

bool QueryGroup::has_label(std::size_t objective) const {
  return std::any_of(labels.begin(), labels.end(), [&](const auto& row) { return row[objective].has_value(); });
}

std::optional<std::size_t> QueryGroup::primary_positive() const {
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p][0] == std::uint8_t{1}) return p;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> QueryGroup::binary_labels(std::size_t objective) const {
  std::vector<std::uint8_t> out(labels.size(), 0);
  for (std::size_t p = 0; p < labels.size(); ++p) out[p] = labels[p][objective].value_or(0);
  return out;
}

std::size_t Dataset::primary_index() const {
  for (const auto& o : objectives) {
    if (o.primary) return o.index;
  }
  throw InputError("dataset has no primary objective");
}

void Dataset::validate() const {
  if (K < 2) throw InputError("need at least 2 objectives");
  if (objectives.size() != K) throw InputError("objective list size does not match K");
  std::set<std::string> names;
  std::size_t primaries = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (objectives[k].index != k) throw InputError("objective indices must be 0..K-1 in order");
    if (!names.insert(objectives[k].name).second) throw InputError("duplicate objective name " + objectives[k].name);
    if (objectives[k].primary) ++primaries;
  }
  if (primaries != 1 || !objectives[0].primary) throw InputError("exactly one primary objective, at index 0");
  for (const auto& g : groups) {
    if (g.items.size() < 2) throw InputError("query " + std::to_string(g.query_id) + " has fewer than 2 items");
    if (g.labels.size() != g.items.size()) throw InputError("label rows do not match items");
    std::size_t positives = 0;
    for (std::size_t p = 0; p < g.items.size(); ++p) {
      const auto& it = g.items[p];
      if (it.features.size() != m) throw InputError("item feature dim does not match m");
      for (double v : it.features) {
        if (!std::isfinite(v)) throw InputError("non-finite feature");
      }
      if (!(it.review_rating >= 0.0 && it.review_rating <= 5.0)) throw InputError("review_rating outside [0,5]");
      if (g.labels[p].size() != K) throw InputError("label row width does not match K");
      for (const auto& l : g.labels[p]) {
        if (l && *l > 1) throw InputError("label values must be 0 or 1");
      }
      if (g.labels[p][0] == std::uint8_t{1}) ++positives;
    }
    if (positives > 1) {
      throw InputError("query " + std::to_string(g.query_id) + " has more than one primary positive");
    }
  }
}

std::vector<ObjectiveSpec> default_objectives(std::size_t K) {
  std::vector<ObjectiveSpec> out;
  for (std::size_t k = 0; k < K; ++k) {
    ObjectiveSpec o;
    o.index = k;
    o.primary = k == 0;
    if (k == 0) {
      o.name = "booking";
    } else if (k == 1) {
      o.name = "cancellation";
      o.polarity = Polarity::kCost;
    } else if (k == 2) {
      o.name = "quality";
    } else {
      o.name = "objective_" + std::to_string(k);
    }
    out.push_back(o);
  }
  return out;
}

void GeneratorConfig::validate() const {
  if (K < 2) throw ConfigError("generator: K must be at least 2");
  if (m < 2) throw ConfigError("generator: m must be at least 2 (rating and review features)");
  if (items_min < 2 || items_max < items_min) throw ConfigError("generator: items per query must satisfy 2 <= min <= max");
  if (num_days == 0) throw ConfigError("generator: num_days must be positive");
  if (!(booking_rate > 0.0 && booking_rate <= 1.0)) throw ConfigError("generator: booking_rate must lie in (0,1]");
  if (!(objective_correlation >= -1.0 && objective_correlation <= 1.0)) {
    throw ConfigError("generator: objective_correlation must lie in [-1,1]");
  }
  if (label_rates.size() != K - 1) throw ConfigError("generator: need one label_rate per secondary objective");
  for (double r : label_rates) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("generator: label rates must lie in (0,1]");
  }
  if (!(new_item_fraction >= 0.0 && new_item_fraction <= 1.0)) throw ConfigError("generator: new_item_fraction must lie in [0,1]");
  if (!(utility_scale >= 0.0) || !std::isfinite(utility_scale)) throw ConfigError("generator: utility_scale must be nonnegative");
  if (!utility_weights.empty()) {
    if (utility_weights.size() != K) throw ConfigError("generator: need K utility weight vectors");
    for (const auto& w : utility_weights) {
      if (w.size() != m) throw ConfigError("generator: utility weight vectors need m entries");
    }
  }
  if (!objectives.empty() && objectives.size() != K) throw ConfigError("generator: objectives list must have K entries");
}

GeneratorConfig GeneratorConfig::resolved() const {
  validate();
  GeneratorConfig r = *this;
  if (r.objectives.empty()) r.objectives = default_objectives(K);
  if (r.utility_weights.empty()) {
    std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    r.utility_weights.assign(K, std::vector<double>(m));
    for (auto& w : r.utility_weights) {
      for (auto& v : w) v = normal(rng);
    }
    // Bookings and quality favour well-reviewed items.
    r.utility_weights[0][kRatingFeature] = std::abs(r.utility_weights[0][kRatingFeature]) + 1.0;
    r.utility_weights[0][kReviewCountFeature] = std::abs(r.utility_weights[0][kReviewCountFeature]) + 0.5;
    if (K > 2) r.utility_weights[2][kRatingFeature] = std::abs(r.utility_weights[2][kRatingFeature]) + 1.0;
  }
  return r;
}

namespace {

std::vector<double> unit(const std::vector<double>& w) {
  double norm = 0.0;
  for (double v : w) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<double> out(w);
  if (norm > 0.0) {
    for (auto& v : out) v /= norm;
  }
  return out;
}

// Favorability direction of objective k: unit primary direction blended with the
// objective's own unit direction by the configured correlation.
std::vector<double> favorability_direction(const GeneratorConfig& c, std::size_t k) {
  const auto primary = unit(c.utility_weights[0]);
  if (k == 0) return primary;
  const auto own = unit(c.utility_weights[k]);
  const double rho = c.objective_correlation;
  const double rest = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  std::vector<double> out(c.m);
  for (std::size_t j = 0; j < c.m; ++j) out[j] = rho * primary[j] + rest * own[j];
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<double> objective_favorability(const GeneratorConfig& resolved, const QueryGroup& group,
                                           std::size_t k) {
  if (k >= resolved.K) throw InputError("objective index out of range");
  const auto dir = favorability_direction(resolved, k);
  std::vector<double> out(group.size());
  for (std::size_t p = 0; p < group.size(); ++p) {
    if (group.items[p].features.size() != resolved.m) throw InputError("item feature dim does not match generator m");
    out[p] = resolved.utility_scale * dot(dir, group.items[p].features);
  }
  return out;
}

std::vector<std::uint8_t> favorable_flags(const GeneratorConfig& resolved, const QueryGroup& group,
                                          std::size_t k) {
  const auto fav = objective_favorability(resolved, group, k);
  std::vector<std::uint8_t> flags(fav.size());
  for (std::size_t p = 0; p < fav.size(); ++p) flags[p] = fav[p] > 0.0 ? 1 : 0;
  return flags;
}

Dataset generate_dataset(const GeneratorConfig& config) {
  const GeneratorConfig c = config.resolved();
  Dataset ds;
  ds.m = c.m;
  ds.K = c.K;
  ds.objectives = c.objectives;

  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> group_size(c.items_min, c.items_max);

  std::uint64_t next_item_id = c.first_query_id * 100;
  ds.groups.reserve(c.num_queries);
  for (std::size_t q = 0; q < c.num_queries; ++q) {
    QueryGroup g;
    g.query_id = c.first_query_id + q;
    g.timestamp = q * c.num_days / c.num_queries;
    const std::size_t n = group_size(rng);
    for (std::size_t p = 0; p < n; ++p) {
      Item it;
      it.item_id = next_item_id++;
      it.features.resize(c.m);
      for (auto& v : it.features) v = normal(rng);
      it.is_new = uniform(rng) < c.new_item_fraction;
      const double rating = std::clamp(4.4 + 0.4 * it.features[kRatingFeature], 1.0, 5.0);
      if (it.is_new) {
        it.review_rating = 0.0;
        it.features[kRatingFeature] = kMissingFeature;
        it.features[kReviewCountFeature] = kMissingFeature;
      } else {
        it.review_rating = rating;
        it.features[kRatingFeature] = (rating - 4.4) / 0.4;
      }
      g.items.push_back(std::move(it));
    }
    g.labels.assign(n, std::vector<Label>(c.K));

    // At most one booking per query, chosen by softmax over primary utility.
    if (uniform(rng) < c.booking_rate) {
      const auto u0 = objective_favorability(c, g, 0);
      const double top = *std::max_element(u0.begin(), u0.end());
      std::vector<double> w(n);
      for (std::size_t p = 0; p < n; ++p) w[p] = std::exp(u0[p] - top);
      std::discrete_distribution<std::size_t> choice(w.begin(), w.end());
      const std::size_t booked = choice(rng);
      for (std::size_t p = 0; p < n; ++p) g.labels[p][0] = static_cast<std::uint8_t>(p == booked ? 1 : 0);
      for (std::size_t k = 1; k < c.K; ++k) {
        const double fav = objective_favorability(c, g, k)[booked];
        const double log_odds = c.objectives[k].polarity == Polarity::kReward ? fav : -fav;
        const bool present = uniform(rng) < c.label_rates[k - 1];
        const bool positive = uniform(rng) < sigmoid(log_odds);
        if (present) g.labels[booked][k] = static_cast<std::uint8_t>(positive ? 1 : 0);
      }
    }
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

std::optional<LabelDistribution> objective_target(const Dataset& dataset, const QueryGroup& group,
                                                  std::size_t k) {
  if (k >= dataset.K) throw InputError("objective index out of range");
  const bool cost = dataset.objectives[k].polarity == Polarity::kCost;
  std::vector<double> rel(group.size(), 0.0);
  double sum = 0.0;
  for (std::size_t p = 0; p < group.size(); ++p) {
    const auto& l = group.labels[p][k];
    if (!l) continue;
    rel[p] = cost ? 1.0 - *l : static_cast<double>(*l);
    sum += rel[p];
  }
  if (sum == 0.0) return std::nullopt;
  return LabelDistribution::from_weights(rel);
}

std::pair<Dataset, Dataset> split_by_time(const Dataset& dataset, std::uint64_t boundary_day) {
  if (dataset.groups.empty()) throw InputError("split_by_time: dataset has no timestamps");
  Dataset earlier{dataset.objectives, {}, dataset.m, dataset.K};
  Dataset later{dataset.objectives, {}, dataset.m, dataset.K};
  for (const auto& g : dataset.groups) {
    (g.timestamp < boundary_day ? earlier : later).groups.push_back(g);
  }
  return {std::move(earlier), std::move(later)};
}

Dataset select_days(const Dataset& dataset, std::uint64_t first_day, std::uint64_t last_day) {
  Dataset out{dataset.objectives, {}, dataset.m, dataset.K};
  for (const auto& g : dataset.groups) {
    if (g.timestamp >= first_day && g.timestamp < last_day) out.groups.push_back(g);
  }
  return out;
}

double label_coverage(const Dataset& dataset, std::size_t objective) {
  if (objective >= dataset.K) throw InputError("objective index out of range");
  if (dataset.groups.empty()) return 0.0;
  std::size_t covered = 0;
  for (const auto& g : dataset.groups) covered += g.has_label(objective) ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(dataset.groups.size());
}

}  // namespace distillrank
