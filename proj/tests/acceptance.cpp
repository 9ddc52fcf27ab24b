// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "distillrank/pipeline.hpp"

using namespace distillrank;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("distillrank_accept_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Plain reference network and listwise loss, written without the library.
double naive_loss(const ParameterSet& p, Activation act, const Matrix& x, const std::vector<double>& target) {
  std::vector<double> scores(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::vector<double> h(x.row(r).begin(), x.row(r).end());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      const auto& L = p.layers[l];
      std::vector<double> out(L.out);
      for (std::size_t o = 0; o < L.out; ++o) {
        double s = L.bias[o];
        for (std::size_t i = 0; i < L.in; ++i) s += h[i] * L.weights[i * L.out + o];
        if (l + 1 < p.layers.size()) s = act == Activation::kTanh ? std::tanh(s) : std::max(0.0, s);
        out[o] = s;
      }
      h = out;
    }
    scores[r] = h[0];
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) loss -= target[i] * (scores[i] - mx - std::log(z));
  return loss;
}

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 8), items(2, 10);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    MlpConfig c;
    c.layer_dims = {dim(rng)};
    const std::size_t hidden = 1 + t % 2;
    for (std::size_t h = 0; h < hidden; ++h) c.layer_dims.push_back(dim(rng));
    c.layer_dims.push_back(1);
    c.activation = t % 2 ? Activation::kTanh : Activation::kRelu;
    c.init_scale = 0.5;
    c.seed = static_cast<std::uint64_t>(t);
    const auto p = initialize_parameters(c);
    const std::size_t n = items(rng);
    Matrix x(n, c.layer_dims[0]);
    for (auto& v : x.data) v = normal(rng);
    std::vector<double> target(n, 0.0);
    target[t % n] = 1.0;
    const auto fwd = mlp_forward(p, c.activation, x);
    const auto g = backward(p, fwd.trace, listwise_ce(fwd.scores, LabelDistribution::from_weights(target)).grad);
    ParameterSet q = p;
    // Smaller steps drown near-zero entries in cancellation noise.
    const double h = 1e-5;
    for (std::size_t i = 0; i < q.num_values(); ++i) {
      const double orig = q.at(i);
      q.at(i) = orig + h;
      const double up = naive_loss(q, c.activation, x, target);
      q.at(i) = orig - h;
      const double down = naive_loss(q, c.activation, x, target);
      q.at(i) = orig;
      const double fd = (up - down) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(g.at(i)), 1e-6});
      worst = std::max(worst, std::abs(fd - g.at(i)) / scale);
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst < 1e-4 && secs < 10.0,
         fmt("20 random MLPs, max relative gradient error %.3g (< 1e-4), %.2f s (< 10 s)", worst, secs));
}

void criterion2() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> size(2, 12), teachers(1, 5);
  std::uniform_real_distribution<double> u(0.001, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = size(rng), K = teachers(rng);
    auto draw = [&] {
      std::vector<double> v(n);
      for (auto& x : v) x = u(rng);
      const double s = std::accumulate(v.begin(), v.end(), 0.0);
      for (auto& x : v) x /= s;
      return v;
    };
    const auto pred = draw();
    std::vector<std::vector<double>> targets;
    for (std::size_t k = 0; k < K; ++k) targets.push_back(draw());
    std::vector<double> w(K);
    for (auto& x : w) x = u(rng);
    const double ws = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= ws;
    // Both sides computed directly from the definition of cross entropy.
    auto ce = [&](const std::vector<double>& f, const std::vector<double>& y) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s -= y[i] * std::log(f[i]);
      return s;
    };
    double lhs = 0.0;
    std::vector<double> mixed(n, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      lhs += w[k] * ce(pred, targets[k]);
      for (std::size_t i = 0; i < n; ++i) mixed[i] += w[k] * targets[k][i];
    }
    worst = std::max(worst, std::abs(lhs - ce(pred, mixed)));
    // The library's weighted sum and fused cross entropy must agree with it.
    std::vector<LabelDistribution> lt;
    for (const auto& y : targets) lt.push_back(LabelDistribution::from_probabilities(y));
    const auto lp = LabelDistribution::from_probabilities(pred);
    worst = std::max(worst, std::abs(weighted_ce_sum(lp, lt, w) - lhs));
    worst = std::max(worst, std::abs(cross_entropy(lp, LabelDistribution::from_weights(mixed)) - lhs));
  }
  report(2, worst < 1e-9, fmt("1000 random triples, max |sum w CE(f,f_k) - CE(f, sum w f_k)| = %.3g (< 1e-9)", worst));
}

void criterion3() {
  GeneratorConfig g;
  g.num_queries = 800;
  g.seed = 31;
  const auto ds = generate_dataset(g);
  TrainConfig t;
  t.seed = 5;
  const auto soft = fuse_soft_labels(train_teachers(ds, t), ds);
  DistillConfig d;
  d.train = t;
  d.alpha = 1.0;
  const bool alpha_one = train_student(ds, soft, d).params == train_hard_only(ds, t).params;

  auto permuted = ds;
  std::mt19937_64 rng(99);
  for (auto& grp : permuted.groups) {
    std::vector<std::size_t> idx(grp.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    auto labels = grp.labels;
    for (std::size_t p = 0; p < grp.size(); ++p) labels[p][0] = grp.labels[idx[p]][0];
    grp.labels = labels;
  }
  d.alpha = 0.0;
  const bool alpha_zero = train_student(ds, soft, d).params == train_student(permuted, soft, d).params;
  report(3, alpha_one && alpha_zero,
         std::string("alpha=1 bit-identical to hard-only: ") + (alpha_one ? "yes" : "no") +
             "; alpha=0 invariant to permuted hard labels: " + (alpha_zero ? "yes" : "no"));
}

void criterion4() {
  std::size_t ndcg_cases = 0, ndcg_bad = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<std::uint8_t> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1u;
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      do {
        // perm[r] is the item at rank r; scores realize that ranking.
        std::vector<double> scores(n);
        for (std::size_t r = 0; r < n; ++r) scores[perm[r]] = static_cast<double>(n - r);
        for (std::size_t k = 1; k <= n + 1; ++k) {
          const std::size_t depth = std::min(k, n);
          double dcg = 0.0;
          for (std::size_t r = 0; r < depth; ++r) dcg += labels[perm[r]] / std::log2(r + 2.0);
          // Ideal DCG by brute force over all rankings.
          std::vector<std::size_t> q(n);
          std::iota(q.begin(), q.end(), std::size_t{0});
          double ideal = 0.0;
          do {
            double s = 0.0;
            for (std::size_t r = 0; r < depth; ++r) s += labels[q[r]] / std::log2(r + 2.0);
            ideal = std::max(ideal, s);
          } while (std::next_permutation(q.begin(), q.end()));
          const double want = ideal == 0.0 ? 0.0 : dcg / ideal;
          ++ndcg_cases;
          if (ndcg_at_k(scores, labels, k) != want) ++ndcg_bad;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }

  std::size_t tau_cases = 0, tau_bad = 0;
  for (std::size_t n = 2; n <= 5; ++n) {
    std::vector<std::size_t> a(n);
    std::iota(a.begin(), a.end(), std::size_t{0});
    do {
      std::vector<std::size_t> b(n);
      std::iota(b.begin(), b.end(), std::size_t{0});
      do {
        std::vector<std::size_t> pa(n), pb(n);
        for (std::size_t r = 0; r < n; ++r) {
          pa[a[r]] = r;
          pb[b[r]] = r;
        }
        long long c = 0, d = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) ((pa[i] < pa[j]) == (pb[i] < pb[j]) ? c : d) += 1;
        }
        const double want = static_cast<double>(c - d) / (static_cast<double>(n * (n - 1)) / 2.0);
        ++tau_cases;
        if (kendall_tau(a, b) != want) ++tau_bad;
      } while (std::next_permutation(b.begin(), b.end()));
    } while (std::next_permutation(a.begin(), a.end()));
  }

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-3, 10.0), scale(0.01, 100.0);
  std::size_t pd_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> a(1 + t % 20), b(a.size());
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    const double c = scale(rng);
    auto a2 = a, b2 = b;
    for (auto& v : a2) v *= c;
    for (auto& v : b2) v *= c;
    const double ab = prediction_difference(a, b);
    if (prediction_difference(a, a) != 0.0) ++pd_bad;
    if (std::abs(ab - prediction_difference(b, a)) > 1e-15) ++pd_bad;
    if (std::abs(ab - prediction_difference(a2, b2)) > 1e-12 * std::max(1.0, ab)) ++pd_bad;
  }
  report(4, ndcg_bad == 0 && tau_bad == 0 && pd_bad == 0,
         "NDCG brute force " + std::to_string(ndcg_cases - ndcg_bad) + "/" + std::to_string(ndcg_cases) +
             " exact; tau pair count " + std::to_string(tau_cases - tau_bad) + "/" + std::to_string(tau_cases) +
             " exact; PD property violations " + std::to_string(pd_bad) + " over 1000 vector pairs");
}

void criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir dir("self");
  ArtifactStore store(dir.path.string(), false);
  ExperimentConfig c;
  c.seeds = 3;
  const auto r = study_self_distillation(c, store);
  const double diff = r.body["summary"]["mean_v1_minus_v0_retrained_ndcg10"].get<double>();
  const double secs = seconds_since(t0);
  report(5, std::abs(diff) <= 0.005 && secs < 600.0,
         fmt("mean NDCG@10(V1 self-distilled) - NDCG@10(V0 retrained) over 3 seeds = %+.4f (|.| <= 0.005), %.0f s", diff,
             secs));
}

void criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir dir("repro");
  ArtifactStore store(dir.path.string(), false);
  ExperimentConfig c;
  c.repro_seeds = 4;
  const auto r = study_irreproducibility(c, store);
  const auto& f = r.body["summary"]["families"];
  const double hc = f["hard_only"]["mean_change_rate"].get<double>();
  const double dc = f["distilled"]["mean_change_rate"].get<double>();
  const double hp = f["hard_only"]["mean_pd"].get<double>();
  const double dp = f["distilled"]["mean_pd"].get<double>();
  const double secs = seconds_since(t0);
  report(6, dc < hc && dp < hp && secs < 1200.0,
         fmt("change rate hard-only %.3f vs distilled %.3f; PD hard-only %.3f vs distilled %.3f", hc, dc, hp, dp) +
             fmt(" (4 seeds per family), %.0f s", secs));
}

void criterion7() {
  TempDir dir("boost");
  ArtifactStore store(dir.path.string(), false);
  ExperimentConfig c;
  c.seeds = 3;
  const auto r = study_adhoc_boost(c, store);
  const auto& s = r.body["summary"];
  double worst_gap = 0.0;
  for (const auto& row : s["per_seed"]) worst_gap = std::max(worst_gap, row["exposure_gap"].get<double>());
  const double soft = s["mean_soft_label_ndcg10_loss"].get<double>();
  const double serving = s["mean_serving_ndcg10_loss"].get<double>();
  report(7, worst_gap <= 0.01 && soft <= serving,
         fmt("mean NDCG@10 loss soft-label boost %.4f vs serving boost %.4f (need <=); max exposure gap %.4f (<= 0.01)",
             soft, serving, worst_gap));
}

void criterion8() {
  ExperimentConfig c;
  c.seeds = 3;
  const std::size_t K = c.generator.K;
  std::vector<double> dist_gap(K, 0.0), hard_gap(K, 0.0);
  double coverage_ratio = 0.0;
  std::size_t runs = 0;
  for (std::size_t s = 0; s < c.seeds; ++s) {
    TempDir dir("sparse" + std::to_string(s));
    ArtifactStore store(dir.path.string(), false);
    ExperimentConfig run = c;
    run.generator.seed = c.generator.seed + s;
    const auto r = study_distill_vs_baselines(run, store);
    std::size_t k = 0;
    for (const auto& o : r.body["summary"]["sparsity"]) {
      ++k;  // secondary objectives follow the primary
      dist_gap[k] += o["distilled_gap"].get<double>() / static_cast<double>(c.seeds);
      hard_gap[k] += o["hard_only_gap"].get<double>() / static_cast<double>(c.seeds);
      coverage_ratio += o["primary_coverage"].get<double>() / o["coverage"].get<double>();
      ++runs;
    }
  }
  std::string detail;
  double dist_mean = 0.0, hard_mean = 0.0;
  for (std::size_t k = 1; k < K; ++k) {
    detail += fmt("obj%.0f |distilled-teacher| %.5f vs |hard-teacher| %.5f; ", static_cast<double>(k), dist_gap[k], hard_gap[k]);
    dist_mean += dist_gap[k] / static_cast<double>(K - 1);
    hard_mean += hard_gap[k] / static_cast<double>(K - 1);
  }
  report(8, dist_mean < hard_mean,
         detail + fmt("mean over secondary objectives %.5f vs %.5f (primary/secondary coverage %.1fx, 3 data seeds)",
                      dist_mean, hard_mean, coverage_ratio / static_cast<double>(runs)));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void criterion9() {
  TempDir dir("cli");
  const auto cfg = dir.path / "config.json";
  std::ofstream(cfg) << R"({"test_queries": 400, "generator": {"num_queries": 1500}, "seeds": 2, "repro_seeds": 2})";
  std::string detail;
  bool ok = true;
  for (const std::string study : {"study-distill", "study-self", "study-repro", "study-boost"}) {
    std::string reports[2];
    for (int rep = 0; rep < 2; ++rep) {
      const auto out = dir.path / (study + "_" + std::to_string(rep));
      std::vector<std::string> args{"distillrank", study, "--config", cfg.string(), "--out", out.string()};
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      std::ostringstream sink;
      auto* old = std::cout.rdbuf(sink.rdbuf());
      const int code = cli_main(static_cast<int>(argv.size()), argv.data());
      std::cout.rdbuf(old);
      if (code != 0) ok = false;
      reports[rep] = read_file(out / "report.json");
    }
    const bool same = !reports[0].empty() && reports[0] == reports[1];
    ok = ok && same;
    detail += study + (same ? " identical; " : " DIFFERS; ");
  }
  report(9, ok, detail + "report.json compared byte for byte across two CLI runs");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
