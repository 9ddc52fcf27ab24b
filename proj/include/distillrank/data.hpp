#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distillrank/loss.hpp"
#include "distillrank/nn.hpp"

namespace distillrank {

enum class Polarity { kReward, kCost };

const char* polarity_name(Polarity p);
Polarity parse_polarity(std::string_view name);

struct ObjectiveSpec {
  std::size_t index = 0;
  std::string name;
  Polarity polarity = Polarity::kReward;
  bool primary = false;
  bool operator==(const ObjectiveSpec&) const = default;
};

/// Features listed first that derive from reviews; new items carry the sentinel there.
inline constexpr std::size_t kRatingFeature = 0;
inline constexpr std::size_t kReviewCountFeature = 1;
inline constexpr double kMissingFeature = -1.0;

struct Item {
  std::vector<double> features;
  double review_rating = 0.0;  // in [0, 5]; 0 for new items
  bool is_new = false;
  std::uint64_t item_id = 0;
  bool operator==(const Item&) const = default;
};

/// Missing labels are nullopt.
using Label = std::optional<std::uint8_t>;

/// One search: n >= 2 items and an n x K sparse label matrix.
struct QueryGroup {
  std::uint64_t query_id = 0;
  std::vector<Item> items;
  std::vector<std::vector<Label>> labels;  // labels[item][objective]
  std::uint64_t timestamp = 0;             // day index

  std::size_t size() const { return items.size(); }
  Matrix feature_matrix() const;
  bool has_label(std::size_t objective) const;
  /// Index of the item with primary label 1, if any.
  std::optional<std::size_t> primary_positive() const;
  /// 0/1 relevance for an objective; missing labels count as 0.
  std::vector<std::uint8_t> binary_labels(std::size_t objective) const;
  bool operator==(const QueryGroup&) const = default;
};

struct Dataset {
  std::vector<ObjectiveSpec> objectives;
  std::vector<QueryGroup> groups;
  std::size_t m = 0;
  std::size_t K = 0;

  /// Throws InputError when any invariant is broken.
  void validate() const;
  std::size_t primary_index() const;
  bool operator==(const Dataset&) const = default;
};

/// Synthetic marketplace generator settings.
struct GeneratorConfig {
  std::size_t num_queries = 5000;
  std::size_t items_min = 8;
  std::size_t items_max = 12;
  std::size_t m = 16;
  std::size_t K = 3;
  std::uint64_t seed = 1;
  std::uint64_t first_query_id = 0;
  std::size_t num_days = 10;
  double booking_rate = 0.6;
  double utility_scale = 2.0;
  /// Per-objective utility weights (m each). Empty means drawn from `seed`.
  std::vector<std::vector<double>> utility_weights;
  /// Correlation between the primary and each secondary favorability direction.
  double objective_correlation = 0.6;
  /// One per secondary objective; chance a booked item carries that label.
  std::vector<double> label_rates = {0.1, 0.1};
  double new_item_fraction = 0.1;
  std::vector<ObjectiveSpec> objectives;  // empty means the default K objectives

  void validate() const;
  /// Copy with utility weights and objectives filled in.
  GeneratorConfig resolved() const;
  bool operator==(const GeneratorConfig&) const = default;
};

std::vector<ObjectiveSpec> default_objectives(std::size_t K);

Dataset generate_dataset(const GeneratorConfig& config);

/// Favorability of every item of `group` for objective `k` under the generator's
/// ground truth (positive means good for that objective, whatever its polarity).
std::vector<double> objective_favorability(const GeneratorConfig& resolved, const QueryGroup& group,
                                           std::size_t k);

/// 1 where favorability > 0.
std::vector<std::uint8_t> favorable_flags(const GeneratorConfig& resolved, const QueryGroup& group,
                                          std::size_t k);

/// Listwise target for objective k: present labels as relevance (flipped for cost
/// objectives), missing labels as 0, normalized. nullopt when nothing is relevant.
std::optional<LabelDistribution> objective_target(const Dataset& dataset, const QueryGroup& group,
                                                  std::size_t k);

void write_dataset(const Dataset& dataset, std::ostream& out);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);
std::string serialize_dataset(const Dataset& dataset);
std::string dataset_hash(const Dataset& dataset);

/// Groups with timestamp < boundary_day go to the first half.
std::pair<Dataset, Dataset> split_by_time(const Dataset& dataset, std::uint64_t boundary_day);

/// Groups within [first_day, last_day).
Dataset select_days(const Dataset& dataset, std::uint64_t first_day, std::uint64_t last_day);

/// Fraction of groups with at least one present label for the objective.
double label_coverage(const Dataset& dataset, std::size_t objective);

}  // namespace distillrank
