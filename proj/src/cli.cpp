#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "distillrank/error.hpp"
#include "distillrank/pipeline.hpp"

namespace distillrank {

using nlohmann::json;

namespace {

// Flag overrides shared by every subcommand; unset flags keep the config value.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::size_t> queries;
  std::optional<std::size_t> epochs;
  std::optional<double> alpha;
  std::optional<std::size_t> seeds;

  void add_common(CLI::App* app) {
    app->add_option("--config", config_path, "Experiment config JSON")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Model init seed");
    app->add_option("--data-seed", data_seed, "Generator seed");
    app->add_option("--queries", queries, "Number of generated queries");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--alpha", alpha, "Hard-label weight of the distillation loss");
  }

  ExperimentConfig load(bool seeds_are_repro) const {
    ExperimentConfig c;
    if (!config_path.empty()) {
      try {
        c = load_experiment_config(config_path);
      } catch (const ParseError& e) {
        throw ConfigError(e.what());
      }
    }
    if (seed) c.train.seed = *seed;
    if (data_seed) c.generator.seed = *data_seed;
    if (queries) c.generator.num_queries = *queries;
    if (epochs) c.train.epochs = *epochs;
    if (alpha) c.distill.alpha = *alpha;
    if (seeds) (seeds_are_repro ? c.repro_seeds : c.seeds) = *seeds;
    c.validate();
    return c;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw InputError("cannot write " + path);
}

std::size_t objective_index(const Dataset& ds, const std::string& key) {
  for (const auto& o : ds.objectives) {
    if (o.name == key || std::to_string(o.index) == key) return o.index;
  }
  throw ConfigError("unknown objective '" + key + "'");
}

void print_hashes(const std::string& what, const std::string& path, const std::string& hash) {
  std::cout << what << " " << path << " " << hash << "\n";
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Multi-objective learning to rank by distillation"};
  app.require_subcommand(1);
  Overrides ov;
  std::string out, data, soft_path, model_path, objective = "0";
  std::vector<std::string> teacher_paths;
  std::vector<double> weights;
  std::optional<double> beta, rho, temperature, teacher_temperature;
  bool hard_only = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  ov.add_common(gen);
  gen->add_option("--out", out, "Output JSONL")->required();

  auto* teacher = app.add_subcommand("train-teacher", "Train one single-objective teacher");
  ov.add_common(teacher);
  teacher->add_option("--data", data)->required()->check(CLI::ExistingFile);
  teacher->add_option("--objective", objective, "Objective index or name");
  teacher->add_option("--out", out)->required();

  auto* fuse = app.add_subcommand("fuse", "Fuse teacher scores into soft labels");
  ov.add_common(fuse);
  fuse->add_option("--data", data)->required()->check(CLI::ExistingFile);
  fuse->add_option("--teacher", teacher_paths, "Teacher checkpoints in objective order")->required();
  fuse->add_option("--weights", weights, "Fusion weights (default uniform)");
  fuse->add_option("--teacher-temperature", teacher_temperature);
  fuse->add_option("--out", out)->required();

  auto* inject = app.add_subcommand("inject-boost", "Boost matching items in a soft label file");
  ov.add_common(inject);
  inject->add_option("--data", data)->required()->check(CLI::ExistingFile);
  inject->add_option("--soft", soft_path)->required()->check(CLI::ExistingFile);
  inject->add_option("--beta", beta);
  inject->add_option("--rho", rho);
  inject->add_option("--out", out)->required();

  auto* student = app.add_subcommand("train-student", "Train a student on soft labels (or hard labels only)");
  ov.add_common(student);
  student->add_option("--data", data)->required()->check(CLI::ExistingFile);
  student->add_option("--soft", soft_path)->check(CLI::ExistingFile);
  student->add_flag("--hard-only", hard_only, "Ignore soft labels");
  student->add_option("--temperature", temperature);
  student->add_option("--out", out)->required();

  auto* self = app.add_subcommand("self-distill", "Train the next student version on new data");
  ov.add_common(self);
  self->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  self->add_option("--data", data)->required()->check(CLI::ExistingFile);
  self->add_option("--out", out)->required();

  auto* score = app.add_subcommand("score", "Score every group of a dataset");
  ov.add_common(score);
  score->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  score->add_option("--data", data)->required()->check(CLI::ExistingFile);
  score->add_option("--out", out)->required();

  auto* eval = app.add_subcommand("eval", "Ranking metrics of a model on a dataset");
  ov.add_common(eval);
  eval->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data)->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Optional JSON output");

  std::vector<CLI::App*> studies;
  for (const char* name : {"study-distill", "study-self", "study-repro", "study-boost"}) {
    auto* s = app.add_subcommand(name, "Run a study and write report.json, report.md and metrics.csv");
    ov.add_common(s);
    s->add_option("--seeds", ov.seeds, "Seeds to average (study-repro: models per family)");
    s->add_option("--out", out, "Report directory (default: config out_dir)");
    studies.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const ExperimentConfig config = ov.load(name == "study-repro");

    if (name == "gen-data") {
      const Dataset ds = generate_dataset(config.generator);
      save_dataset(ds, out);
      print_hashes("dataset", out, dataset_hash(ds));
    } else if (name == "train-teacher") {
      const Dataset ds = load_dataset(data);
      const Model m = train_teacher(ds, objective_index(ds, objective), config.train);
      save_model(m, out);
      print_hashes("checkpoint", out, m.hash());
    } else if (name == "fuse") {
      const Dataset ds = load_dataset(data);
      TeacherEnsemble t;
      for (const auto& p : teacher_paths) t.models.push_back(load_model(p));
      t.weights = weights.empty() ? std::vector<double>(t.models.size(), 1.0 / static_cast<double>(t.models.size()))
                                  : weights;
      const SoftLabelSet soft =
          fuse_soft_labels(t, ds, teacher_temperature.value_or(config.distill.teacher_temperature));
      save_soft_labels(soft, out);
      std::cout << "soft_labels " << out << " " << soft.provenance.describe() << "\n";
    } else if (name == "inject-boost") {
      const Dataset ds = load_dataset(data);
      BoostRule rule = config.boost;
      if (beta) rule.beta = *beta;
      if (rho) rule.rho = *rho;
      rule.validate();
      const SoftLabelSet soft = inject_boost(load_soft_labels(soft_path), rule, ds);
      save_soft_labels(soft, out);
      std::cout << "soft_labels " << out << " " << soft.provenance.describe() << "\n";
    } else if (name == "train-student") {
      const Dataset ds = load_dataset(data);
      Model m;
      if (hard_only || soft_path.empty()) {
        m = train_hard_only(ds, config.train);
      } else {
        DistillConfig dc = config.distill_for(config.train.seed, config.distill.alpha);
        if (temperature) dc.temperature = *temperature;
        m = train_student(ds, load_soft_labels(soft_path), dc);
      }
      save_model(m, out);
      print_hashes("checkpoint", out, m.hash());
    } else if (name == "self-distill") {
      const Model prev = load_model(model_path);
      const Model next =
          self_distill_step(prev, load_dataset(data), config.distill_for(config.train.seed, config.distill.alpha));
      save_model(next, out);
      print_hashes("checkpoint", out, next.hash());
    } else if (name == "score") {
      const Dataset ds = load_dataset(data);
      const auto scores = score_dataset(load_model(model_path), ds);
      std::ostringstream os;
      for (std::size_t i = 0; i < ds.groups.size(); ++i) {
        os << json{{"query_id", ds.groups[i].query_id}, {"scores", scores[i]}}.dump() << "\n";
      }
      write_text(out, os.str());
    } else if (name == "eval") {
      const Dataset ds = load_dataset(data);
      const Model m = load_model(model_path);
      const GeneratorConfig truth = config.generator.resolved();
      EvalOptions opts;
      opts.exposure_k = config.exposure_k;
      opts.boost_k = config.boost_k;
      opts.boost_rule = config.boost;
      if (truth.m == ds.m && truth.K == ds.K) opts.generator = &truth;
      json j = metrics_to_json(evaluate_ranking(score_dataset(m, ds), ds, opts));
      j["checkpoint"] = m.hash();
      j["dataset"] = dataset_hash(ds);
      if (!out.empty()) write_text(out, j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
    } else {
      const std::string dir = out.empty() ? config.out_dir : out;
      ArtifactStore store(dir, config.persist_datasets);
      ExperimentReport report;
      if (name == "study-distill") {
        report = study_distill_vs_baselines(config, store);
      } else if (name == "study-self") {
        report = study_self_distillation(config, store);
      } else if (name == "study-repro") {
        report = study_irreproducibility(config, store);
      } else {
        report = study_adhoc_boost(config, store);
      }
      write_report(report, dir);
      std::cout << "report " << dir << "/report.json\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace distillrank
