#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "distillrank/error.hpp"
#include "distillrank/pipeline.hpp"

namespace distillrank {

using nlohmann::json;

namespace {

std::string num(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw InputError("cannot write " + path.string());
}

std::string render_value(const json& v) {
  if (v.is_number_float()) return num(v.get<double>(), "%.4f");
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + render_value(v[i]);
    return s;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

std::string render_markdown(const ExperimentReport& report) {
  std::ostringstream md;
  md << "# Study: " << report.study << "\n\n";
  md << "## Arms\n\n";
  md << "| arm | seed | NDCG@5 | NDCG@10 | NDCG | exposure per objective | boosted exposure | checkpoint |\n";
  md << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& arm : report.body.value("arms", json::array())) {
    const auto& m = arm["metrics"];
    md << "| " << arm["arm"].get<std::string>() << " | " << arm["seed"].get<std::uint64_t>() << " | "
       << render_value(m["ndcg5"]) << " | " << render_value(m["ndcg10"]) << " | " << render_value(m["ndcg_full"])
       << " | " << render_value(m["objective_exposure"]) << " | " << render_value(m["boosted_exposure"]) << " | "
       << arm["checkpoints"][0].get<std::string>() << " |\n";
  }
  if (report.body.contains("summary")) {
    md << "\n## Summary\n\n";
    for (const auto& [key, value] : report.body["summary"].items()) {
      if (value.is_object() || (value.is_array() && !value.empty() && value[0].is_object())) {
        md << "- " << key << ":\n\n```json\n" << value.dump(2) << "\n```\n";
      } else {
        md << "- " << key << ": " << render_value(value) << "\n";
      }
    }
  }
  md << "\nDatasets and checkpoints are stored by content hash next to this report.\n";
  return md.str();
}

void write_report(const ExperimentReport& report, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  write_file(root / "report.json", report.body.dump(2) + "\n");
  write_file(root / "report.md", render_markdown(report));

  std::size_t objectives = 0;
  for (const auto& r : report.rows) objectives = std::max(objectives, r.metrics.objective_exposure.size());
  std::ostringstream csv;
  csv << "study,arm,seed,query_id,has_relevant,ndcg5,ndcg10,ndcg_full,boosted_exposure";
  for (std::size_t k = 0; k < objectives; ++k) csv << ",exposure_obj" << k;
  csv << "\n";
  for (const auto& r : report.rows) {
    const auto& q = r.metrics;
    csv << report.study << ',' << r.arm << ',' << r.seed << ',' << q.query_id << ',' << (q.has_relevant ? 1 : 0) << ','
        << num(q.ndcg5) << ',' << num(q.ndcg10) << ',' << num(q.ndcg_full) << ',' << num(q.boosted_exposure);
    for (std::size_t k = 0; k < objectives; ++k) {
      csv << ',' << (k < q.objective_exposure.size() ? num(q.objective_exposure[k]) : "");
    }
    csv << "\n";
  }
  write_file(root / "metrics.csv", csv.str());
}

}  // namespace distillrank
