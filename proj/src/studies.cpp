#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "distillrank/error.hpp"
#include "distillrank/hash.hpp"
#include "distillrank/pipeline.hpp"

namespace distillrank {

using nlohmann::json;
namespace fs = std::filesystem;

ArtifactStore::ArtifactStore(std::string root, bool persist_datasets)
    : root_(std::move(root)), persist_datasets_(persist_datasets) {}

std::string ArtifactStore::put_model(const Model& model) {
  const std::string hash = model.hash();
  const fs::path dir = fs::path(root_) / "checkpoints";
  fs::create_directories(dir);
  const fs::path path = dir / (hash + ".json");
  if (!fs::exists(path)) save_model(model, path.string());
  return hash;
}

std::string ArtifactStore::put_dataset(const Dataset& dataset) {
  const std::string text = serialize_dataset(dataset);
  const std::string hash = content_hash(text);
  if (persist_datasets_) {
    const fs::path dir = fs::path(root_) / "datasets";
    fs::create_directories(dir);
    const fs::path path = dir / (hash + ".jsonl");
    if (!fs::exists(path)) {
      std::ofstream out(path, std::ios::binary);
      out << text;
      if (!out) throw InputError("cannot write " + path.string());
    }
  }
  return hash;
}

json metrics_to_json(const RankingMetricsReport& r) {
  return json{{"ndcg5", r.ndcg5},
              {"ndcg10", r.ndcg10},
              {"ndcg_full", r.ndcg_full},
              {"objective_exposure", r.objective_exposure},
              {"boosted_exposure", r.boosted_exposure},
              {"exposure_k", r.exposure_k},
              {"query_count", r.query_count},
              {"total_queries", r.total_queries}};
}

json sxs_to_json(const SxSReport& r) {
  return json{{"change_rate", r.change_rate},
              {"mean_tau", r.mean_tau},
              {"pd", r.pd},
              {"tau_threshold", r.tau_threshold},
              {"queries", r.queries}};
}

namespace {

struct Split {
  GeneratorConfig generator;  // resolved
  Dataset train;
  Dataset test;
  std::string train_hash;
  std::string test_hash;
};

// Held-out queries share the ground truth of the training data but not its draws.
Dataset held_out(const GeneratorConfig& resolved, std::size_t queries) {
  GeneratorConfig t = resolved;
  t.num_queries = queries;
  t.seed = resolved.seed ^ 0x7e57da7aULL;
  t.first_query_id = resolved.first_query_id + resolved.num_queries;
  return generate_dataset(t);
}

Split make_split(const ExperimentConfig& config, const GeneratorConfig& generator, ArtifactStore& store) {
  Split s;
  s.generator = generator.resolved();
  s.train = generate_dataset(s.generator);
  s.test = held_out(s.generator, config.test_queries);
  s.train_hash = store.put_dataset(s.train);
  s.test_hash = store.put_dataset(s.test);
  return s;
}

EvalOptions eval_options(const ExperimentConfig& config, const GeneratorConfig& resolved) {
  EvalOptions o;
  o.exposure_k = config.exposure_k;
  o.boost_k = config.boost_k;
  o.generator = &resolved;
  o.boost_rule = config.boost;
  return o;
}

// Evaluates one arm and records its provenance next to the numbers.
class ArmRecorder {
 public:
  ArmRecorder(const ExperimentConfig& config, ExperimentReport& report) : config_(config), report_(report) {}

  RankingMetricsReport record(const std::string& arm, std::uint64_t seed, const std::vector<std::vector<double>>& scores,
                              const Split& split, const std::vector<std::string>& checkpoints, json extra = json::object()) {
    const auto metrics = evaluate_ranking(scores, split.test, eval_options(config_, split.generator));
    json row{{"arm", arm},
             {"seed", seed},
             {"metrics", metrics_to_json(metrics)},
             {"checkpoints", checkpoints},
             {"train_dataset", split.train_hash},
             {"test_dataset", split.test_hash}};
    for (auto& [k, v] : extra.items()) row[k] = v;
    report_.body["arms"].push_back(std::move(row));
    for (const auto& q : metrics.per_query) report_.rows.push_back(MetricRow{arm, seed, q});
    return metrics;
  }

 private:
  const ExperimentConfig& config_;
  ExperimentReport& report_;
};

ExperimentReport new_report(const std::string& study, const ExperimentConfig& config) {
  ExperimentReport r;
  r.study = study;
  r.body = json{{"study", study}, {"config", experiment_config_to_json(config)}, {"arms", json::array()}};
  return r;
}

std::string alpha_arm(double alpha) {
  std::ostringstream os;
  os << "student_alpha_" << alpha;
  return os.str();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : compensated_sum(v) / static_cast<double>(v.size());
}

std::vector<double> resolve_weights(const std::vector<double>& w, std::size_t K) {
  return w.empty() ? std::vector<double>(K, 1.0 / static_cast<double>(K)) : w;
}

std::vector<std::string> put_all(ArtifactStore& store, const TeacherEnsemble& teachers) {
  std::vector<std::string> hashes;
  for (const auto& m : teachers.models) hashes.push_back(store.put_model(m));
  return hashes;
}

std::vector<std::vector<double>> fusion_scores(const TeacherEnsemble& teachers, const Dataset& dataset) {
  std::vector<std::vector<double>> out;
  out.reserve(dataset.groups.size());
  for (const auto& g : dataset.groups) out.push_back(fusion_serve_scores(teachers, g));
  return out;
}

}  // namespace

ExperimentReport study_distill_vs_baselines(const ExperimentConfig& config, ArtifactStore& store) {
  config.validate();
  ExperimentReport report = new_report("distill_vs_baselines", config);
  ArmRecorder rec(config, report);
  const Split split = make_split(config, config.generator, store);
  const std::uint64_t seed = config.train.seed;
  const std::size_t K = split.train.K;

  const TeacherEnsemble teachers =
      train_teachers(split.train, config.train_for(seed), resolve_weights(config.fusion_weights, K));
  const auto teacher_hashes = put_all(store, teachers);
  std::vector<RankingMetricsReport> teacher_metrics;
  for (std::size_t k = 0; k < K; ++k) {
    teacher_metrics.push_back(rec.record("teacher_" + split.train.objectives[k].name, seed,
                                         score_dataset(teachers.models[k], split.test), split, {teacher_hashes[k]}));
  }
  const auto fusion = rec.record("fusion_baseline", seed, fusion_scores(teachers, split.test), split, teacher_hashes);

  TrainingLog scal_log;
  const Model scalarized =
      train_scalarized_baseline(split.train, resolve_weights(config.scalarized_weights, K), config.train_for(seed), &scal_log);
  rec.record("scalarized_baseline", seed, score_dataset(scalarized, split.test), split, {store.put_model(scalarized)},
             json{{"objective_groups", scal_log.objective_groups}, {"objective_batches", scal_log.objective_batches}});

  const Model hard = train_hard_only(split.train, config.train_for(seed));
  const auto hard_metrics = rec.record("hard_only", seed, score_dataset(hard, split.test), split, {store.put_model(hard)});

  const SoftLabelSet soft = fuse_soft_labels(teachers, split.train, config.distill.teacher_temperature);
  std::vector<double> alphas = config.alpha_sweep;
  if (std::find(alphas.begin(), alphas.end(), config.distill.alpha) == alphas.end()) alphas.push_back(config.distill.alpha);
  RankingMetricsReport distilled;
  for (double a : alphas) {
    const Model student = train_student(split.train, soft, config.distill_for(seed, a));
    std::vector<std::string> hashes{store.put_model(student)};
    hashes.insert(hashes.end(), teacher_hashes.begin(), teacher_hashes.end());
    const auto m = rec.record(alpha_arm(a), seed, score_dataset(student, split.test), split, hashes, json{{"alpha", a}});
    if (a == config.distill.alpha) distilled = m;
  }

  json deltas = json::object();
  for (const auto& arm : report.body["arms"]) {
    const auto& m = arm["metrics"];
    json exp_delta = json::array();
    for (std::size_t k = 0; k < K; ++k) {
      exp_delta.push_back(m["objective_exposure"][k].get<double>() - fusion.objective_exposure[k]);
    }
    deltas[arm["arm"].get<std::string>()] = json{{"ndcg10", m["ndcg10"].get<double>() - fusion.ndcg10},
                                                 {"ndcg5", m["ndcg5"].get<double>() - fusion.ndcg5},
                                                 {"objective_exposure", exp_delta}};
  }
  json sparsity = json::array();
  const std::size_t primary = split.train.primary_index();
  for (std::size_t k = 0; k < K; ++k) {
    if (k == primary) continue;
    const double t = teacher_metrics[k].objective_exposure[k];
    const double gap_d = std::abs(distilled.objective_exposure[k] - t);
    const double gap_h = std::abs(hard_metrics.objective_exposure[k] - t);
    sparsity.push_back(json{{"objective", split.train.objectives[k].name},
                            {"coverage", label_coverage(split.train, k)},
                            {"primary_coverage", label_coverage(split.train, primary)},
                            {"teacher_exposure", t},
                            {"distilled_exposure", distilled.objective_exposure[k]},
                            {"hard_only_exposure", hard_metrics.objective_exposure[k]},
                            {"distilled_gap", gap_d},
                            {"hard_only_gap", gap_h},
                            {"distilled_closer", gap_d < gap_h}});
  }
  report.body["summary"] = json{{"baseline", "fusion_baseline"},
                                {"distilled_arm", alpha_arm(config.distill.alpha)},
                                {"distilled_ndcg10", distilled.ndcg10},
                                {"fusion_ndcg10", fusion.ndcg10},
                                {"hard_only_ndcg10", hard_metrics.ndcg10},
                                {"distilled_minus_fusion_ndcg10", distilled.ndcg10 - fusion.ndcg10},
                                {"distilled_minus_hard_only_ndcg10", distilled.ndcg10 - hard_metrics.ndcg10},
                                {"deltas_vs_baseline", deltas},
                                {"sparsity", sparsity}};
  return report;
}

ExperimentReport study_self_distillation(const ExperimentConfig& config, ArtifactStore& store) {
  config.validate();
  ExperimentReport report = new_report("self_distillation", config);
  ArmRecorder rec(config, report);
  const std::size_t span_days = config.window_days + config.generations * config.shift_days;
  std::vector<double> diffs;
  json per_seed = json::array();
  for (std::size_t s = 0; s < config.seeds; ++s) {
    GeneratorConfig g = config.generator;
    g.seed = config.generator.seed + s;
    g.num_days = span_days;
    // Every window holds about num_queries groups.
    g.num_queries = config.generator.num_queries * span_days / config.window_days;
    const Split split = make_split(config, g, store);
    const std::uint64_t seed = config.train.seed;
    const DistillConfig dc = config.distill_for(seed, config.distill.alpha);
    const std::size_t K = split.train.K;

    std::vector<Dataset> windows;
    for (std::size_t gen = 0; gen <= config.generations; ++gen) {
      const std::uint64_t first = gen * config.shift_days;
      Dataset w = select_days(split.train, first, first + config.window_days);
      if (w.groups.empty()) {
        throw ConfigError("time window [" + std::to_string(first) + ", " + std::to_string(first + config.window_days) +
                          ") holds no queries");
      }
      windows.push_back(std::move(w));
    }

    const TeacherEnsemble teachers_a =
        train_teachers(windows[0], config.train_for(seed), resolve_weights(config.fusion_weights, K));
    const auto hashes_a = put_all(store, teachers_a);
    const Model v0 = train_student(windows[0], fuse_soft_labels(teachers_a, windows[0], dc.teacher_temperature), dc);
    std::vector<std::string> v0_hashes{store.put_model(v0)};
    v0_hashes.insert(v0_hashes.end(), hashes_a.begin(), hashes_a.end());
    rec.record("v0", g.seed, score_dataset(v0, split.test), split, v0_hashes,
               json{{"window", json::array({std::size_t{0}, config.window_days})}, {"lineage", v0.lineage.chain}});

    std::vector<Model> chain{v0};
    std::vector<std::string> prev_hashes = v0_hashes;
    RankingMetricsReport v1_metrics;
    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
      Model next = self_distill_step(chain.back(), windows[gen], dc);
      if (next.lineage.version != static_cast<int>(gen) || !lineage_is_consistent(next.lineage)) {
        throw InternalError("self-distillation lineage broke at generation " + std::to_string(gen));
      }
      std::vector<std::string> hashes{store.put_model(next)};
      hashes.insert(hashes.end(), prev_hashes.begin(), prev_hashes.end());
      const std::uint64_t first = gen * config.shift_days;
      const auto m = rec.record("v" + std::to_string(gen), g.seed, score_dataset(next, split.test), split, hashes,
                                json{{"window", json::array({first, first + config.window_days})},
                                     {"lineage", next.lineage.chain},
                                     {"parent", next.lineage.parent_hash}});
      if (gen == 1) v1_metrics = m;
      prev_hashes = hashes;
      chain.push_back(std::move(next));
    }

    const TeacherEnsemble teachers_b =
        train_teachers(windows[1], config.train_for(seed), resolve_weights(config.fusion_weights, K));
    const auto hashes_b = put_all(store, teachers_b);
    const Model v0r = train_student(windows[1], fuse_soft_labels(teachers_b, windows[1], dc.teacher_temperature), dc);
    std::vector<std::string> v0r_hashes{store.put_model(v0r)};
    v0r_hashes.insert(v0r_hashes.end(), hashes_b.begin(), hashes_b.end());
    const auto v0r_metrics =
        rec.record("v0_retrained", g.seed, score_dataset(v0r, split.test), split, v0r_hashes,
                   json{{"window", json::array({config.shift_days, config.shift_days + config.window_days})}});

    const double diff = v1_metrics.ndcg10 - v0r_metrics.ndcg10;
    diffs.push_back(diff);
    per_seed.push_back(json{{"seed", g.seed},
                            {"v1_ndcg10", v1_metrics.ndcg10},
                            {"v0_retrained_ndcg10", v0r_metrics.ndcg10},
                            {"v1_minus_v0_retrained", diff}});
  }
  const double mean_diff = mean_of(diffs);
  report.body["summary"] = json{{"per_seed", per_seed},
                                {"mean_v1_minus_v0_retrained_ndcg10", mean_diff},
                                {"abs_mean_difference", std::abs(mean_diff)},
                                {"generations", config.generations}};
  return report;
}

ExperimentReport study_irreproducibility(const ExperimentConfig& config, ArtifactStore& store) {
  if (config.repro_seeds < 2) throw ConfigError("repro_seeds must be at least 2 for the irreproducibility study");
  config.validate();
  ExperimentReport report = new_report("irreproducibility", config);
  ArmRecorder rec(config, report);
  const Split split = make_split(config, config.generator, store);
  const std::size_t K = split.train.K;
  const TeacherEnsemble teachers =
      train_teachers(split.train, config.train_for(config.train.seed), resolve_weights(config.fusion_weights, K));
  const auto teacher_hashes = put_all(store, teachers);
  const SoftLabelSet soft = fuse_soft_labels(teachers, split.train, config.distill.teacher_temperature);

  struct Member {
    std::string hash;
    std::vector<std::vector<double>> scores;
  };
  std::map<std::string, std::vector<Member>> families;
  for (std::size_t i = 0; i < config.repro_seeds; ++i) {
    const std::uint64_t seed = config.train.seed + i;
    const Model hard = train_hard_only(split.train, config.train_for(seed));
    Member h{store.put_model(hard), score_dataset(hard, split.test)};
    rec.record("hard_only", seed, h.scores, split, {h.hash});
    families["hard_only"].push_back(std::move(h));

    const Model student = train_student(split.train, soft, config.distill_for(seed, config.distill.alpha));
    Member d{store.put_model(student), score_dataset(student, split.test)};
    std::vector<std::string> hashes{d.hash};
    hashes.insert(hashes.end(), teacher_hashes.begin(), teacher_hashes.end());
    rec.record("distilled", seed, d.scores, split, hashes);
    families["distilled"].push_back(std::move(d));
  }

  json fam = json::object();
  std::map<std::string, std::pair<double, double>> means;
  for (const auto& [name, members] : families) {
    json pairs = json::array();
    std::vector<double> rates, pds;
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const auto sxs = sxs_compare(members[a].scores, members[b].scores, config.tau_threshold, config.sxs_depth);
        rates.push_back(sxs.change_rate);
        pds.push_back(sxs.pd);
        json p = sxs_to_json(sxs);
        p["checkpoints"] = {members[a].hash, members[b].hash};
        p["test_dataset"] = split.test_hash;
        pairs.push_back(std::move(p));
      }
    }
    means[name] = {mean_of(rates), mean_of(pds)};
    fam[name] = json{{"mean_change_rate", means[name].first}, {"mean_pd", means[name].second}, {"pairs", pairs}};
  }
  const auto [hard_rate, hard_pd] = means["hard_only"];
  const auto [dist_rate, dist_pd] = means["distilled"];
  auto reduction = [](double base, double now) { return base > 0.0 ? (base - now) / base : 0.0; };
  report.body["summary"] = json{{"families", fam},
                                {"change_rate_reduction", reduction(hard_rate, dist_rate)},
                                {"pd_reduction", reduction(hard_pd, dist_pd)},
                                {"distilled_lower_change_rate", dist_rate < hard_rate},
                                {"distilled_lower_pd", dist_pd < hard_pd}};
  return report;
}

GammaCalibration calibrate_serving_gamma(const std::function<double(double)>& exposure_at, double target, double tol,
                                         double gamma_max, std::size_t max_iter) {
  if (!(gamma_max > 0.0)) throw ConfigError("gamma_max must be positive");
  GammaCalibration best;
  std::size_t iterations = 0;
  bool have = false;
  auto probe = [&](double gamma) {
    ++iterations;
    const double e = exposure_at(gamma);
    if (!have || std::abs(e - target) < std::abs(best.exposure - target)) best = {gamma, e, 0};
    have = true;
    return e;
  };
  auto done = [&] {
    best.iterations = iterations;
    if (std::abs(best.exposure - target) > tol) {
      throw CalibrationError("serving boost calibration did not reach exposure " + std::to_string(target) + " within " +
                             std::to_string(iterations) + " iterations");
    }
    return best;
  };
  double lo = 0.0;
  double e_lo = probe(lo);
  if (e_lo == target) return done();
  double hi;
  double e_hi;
  if (e_lo > target) {
    // Demotion needed; walk the lower end down.
    hi = lo;
    e_hi = e_lo;
    lo = -gamma_max;
    e_lo = probe(lo);
    while (e_lo > target && iterations < max_iter) {
      hi = lo;
      e_hi = e_lo;
      lo *= 2.0;
      const double e = probe(lo);
      if (e > e_hi) throw InternalError("boosted exposure decreased as gamma increased");
      e_lo = e;
    }
  } else {
    hi = gamma_max;
    e_hi = probe(hi);
    while (e_hi < target && iterations < max_iter) {
      lo = hi;
      e_lo = e_hi;
      hi *= 2.0;
      const double e = probe(hi);
      if (e < e_lo) throw InternalError("boosted exposure decreased as gamma increased");
      e_hi = e;
    }
  }
  if (e_lo > target || e_hi < target) return done();
  while (best.exposure != target && hi - lo > 1e-6 * gamma_max && iterations < max_iter) {
    const double mid = 0.5 * (lo + hi);
    const double e = probe(mid);
    if (e < e_lo || e > e_hi) throw InternalError("boosted exposure is not monotone in gamma");
    if (e < target) {
      lo = mid;
      e_lo = e;
    } else {
      hi = mid;
      e_hi = e;
    }
  }
  return done();
}

ExperimentReport study_adhoc_boost(const ExperimentConfig& config, ArtifactStore& store) {
  config.validate();
  ExperimentReport report = new_report("adhoc_boost", config);
  ArmRecorder rec(config, report);
  std::vector<double> soft_losses, serving_losses;
  json per_seed = json::array();
  for (std::size_t s = 0; s < config.seeds; ++s) {
    GeneratorConfig g = config.generator;
    g.seed = config.generator.seed + s;
    const Split split = make_split(config, g, store);
    const std::size_t K = split.train.K;
    const std::uint64_t seed = config.train.seed;
    const DistillConfig dc = config.distill_for(seed, config.distill.alpha);

    const TeacherEnsemble teachers =
        train_teachers(split.train, config.train_for(seed), resolve_weights(config.fusion_weights, K));
    const auto teacher_hashes = put_all(store, teachers);
    const SoftLabelSet soft = fuse_soft_labels(teachers, split.train, dc.teacher_temperature);

    const Model base = train_student(split.train, soft, dc);
    std::vector<std::string> base_hashes{store.put_model(base)};
    base_hashes.insert(base_hashes.end(), teacher_hashes.begin(), teacher_hashes.end());
    const auto base_scores = score_dataset(base, split.test);
    const auto base_metrics = rec.record("unboosted", g.seed, base_scores, split, base_hashes);

    const Model boosted = train_student(split.train, inject_boost(soft, config.boost, split.train), dc);
    std::vector<std::string> soft_hashes{store.put_model(boosted)};
    soft_hashes.insert(soft_hashes.end(), teacher_hashes.begin(), teacher_hashes.end());
    const auto soft_metrics = rec.record("soft_label_boost", g.seed, score_dataset(boosted, split.test), split,
                                         soft_hashes, json{{"beta", config.boost.beta}, {"rule", config.boost.describe()}});

    const EvalOptions opts = eval_options(config, split.generator);
    auto serving_scores = [&](double gamma) {
      std::vector<std::vector<double>> out;
      out.reserve(base_scores.size());
      for (std::size_t i = 0; i < base_scores.size(); ++i) {
        out.push_back(apply_serving_boost(base_scores[i], split.test.groups[i], config.boost, gamma));
      }
      return out;
    };
    auto exposure_at = [&](double gamma) {
      return evaluate_ranking(serving_scores(gamma), split.test, opts).boosted_exposure;
    };
    const GammaCalibration cal = calibrate_serving_gamma(exposure_at, soft_metrics.boosted_exposure, config.exposure_tolerance,
                                            config.gamma_max, config.max_calibration_iterations);
    const auto serving_metrics =
        rec.record("serving_boost", g.seed, serving_scores(cal.gamma), split, base_hashes, json{{"gamma", cal.gamma}});

    const double soft_loss = base_metrics.ndcg10 - soft_metrics.ndcg10;
    const double serving_loss = base_metrics.ndcg10 - serving_metrics.ndcg10;
    soft_losses.push_back(soft_loss);
    serving_losses.push_back(serving_loss);
    per_seed.push_back(json{{"seed", g.seed},
                            {"beta", config.boost.beta},
                            {"gamma", cal.gamma},
                            {"calibration_iterations", cal.iterations},
                            {"unboosted_exposure", base_metrics.boosted_exposure},
                            {"soft_label_exposure", soft_metrics.boosted_exposure},
                            {"serving_exposure", serving_metrics.boosted_exposure},
                            {"exposure_gap", std::abs(serving_metrics.boosted_exposure - soft_metrics.boosted_exposure)},
                            {"soft_label_ndcg10_loss", soft_loss},
                            {"serving_ndcg10_loss", serving_loss}});
  }
  const double soft_mean = mean_of(soft_losses);
  const double serving_mean = mean_of(serving_losses);
  report.body["summary"] = json{{"per_seed", per_seed},
                                {"boost_k", config.boost_k},
                                {"exposure_tolerance", config.exposure_tolerance},
                                {"mean_soft_label_ndcg10_loss", soft_mean},
                                {"mean_serving_ndcg10_loss", serving_mean},
                                {"soft_label_loss_not_worse", soft_mean <= serving_mean}};
  return report;
}

}  // namespace distillrank
