#include <fstream>

#include "distillrank/distill.hpp"
#include "distillrank/error.hpp"

namespace distillrank {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "distillrank.soft_labels";

const char* source_name(SoftLabelSource s) {
  switch (s) {
    case SoftLabelSource::kTeacherFusion: return "teacher_fusion";
    case SoftLabelSource::kSelfDistill: return "self_distill";
    case SoftLabelSource::kBoosted: return "boosted";
  }
  return "unknown";
}

SoftLabelSource parse_source(const std::string& s) {
  for (auto v : {SoftLabelSource::kTeacherFusion, SoftLabelSource::kSelfDistill, SoftLabelSource::kBoosted}) {
    if (s == source_name(v)) return v;
  }
  throw InputError("unknown soft label source '" + s + "'");
}

}  // namespace

void write_soft_labels(const SoftLabelSet& soft, std::ostream& out) {
  const auto& p = soft.provenance;
  out << json{{"format", kFormat},
              {"version", 1},
              {"temperature", soft.temperature},
              {"provenance",
               {{"source", source_name(p.source)}, {"version", p.version}, {"rule", p.rule}, {"chain", p.chain}}}}
             .dump()
      << '\n';
  for (const auto& g : soft.groups) out << json{{"query_id", g.query_id}, {"scores", g.scores}}.dump() << '\n';
}

SoftLabelSet read_soft_labels(std::istream& in) {
  SoftLabelSet soft;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (!j.is_object() || j.value("format", "") != kFormat) throw ParseError("first line must be a soft label header", line_no);
        soft.temperature = j.at("temperature").get<double>();
        const auto& p = j.at("provenance");
        soft.provenance.source = parse_source(p.at("source").get<std::string>());
        soft.provenance.version = p.at("version").get<int>();
        soft.provenance.rule = p.at("rule").get<std::string>();
        soft.provenance.chain = p.at("chain").get<std::vector<std::string>>();
        have_header = true;
        continue;
      }
      SoftLabelGroup g;
      g.query_id = j.at("query_id").get<std::uint64_t>();
      g.scores = j.at("scores").get<std::vector<double>>();
      g.distribution = listwise_softmax(g.scores, soft.temperature);
      soft.groups.push_back(std::move(g));
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("missing soft label header line", line_no == 0 ? 1 : line_no);
  return soft;
}

void save_soft_labels(const SoftLabelSet& soft, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  write_soft_labels(soft, out);
}

SoftLabelSet load_soft_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_soft_labels(in);
}

}  // namespace distillrank
