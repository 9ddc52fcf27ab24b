#include <fstream>
#include <sstream>

#include "distillrank/data.hpp"
#include "distillrank/error.hpp"
#include "distillrank/hash.hpp"
#include "json.hpp"

namespace distillrank {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "distillrank.dataset";
constexpr int kVersion = 1;

json header_to_json(const Dataset& ds) {
  json objectives = json::array();
  for (const auto& o : ds.objectives) {
    objectives.push_back(
        json{{"index", o.index}, {"name", o.name}, {"polarity", polarity_name(o.polarity)}, {"primary", o.primary}});
  }
  return json{{"format", kFormat}, {"version", kVersion}, {"m", ds.m}, {"K", ds.K}, {"objectives", objectives}};
}

json group_to_json(const QueryGroup& g) {
  json items = json::array();
  json labels = json::array();
  for (std::size_t p = 0; p < g.items.size(); ++p) {
    const auto& it = g.items[p];
    items.push_back(json{{"item_id", it.item_id},
                         {"features", it.features},
                         {"review_rating", it.review_rating},
                         {"is_new", it.is_new}});
    json row = json::array();
    for (const auto& l : g.labels[p]) row.push_back(l ? json(static_cast<int>(*l)) : json(nullptr));
    labels.push_back(std::move(row));
  }
  return json{{"query_id", g.query_id}, {"timestamp", g.timestamp}, {"items", items}, {"labels", labels}};
}

QueryGroup group_from_json(const json& j) {
  QueryGroup g;
  g.query_id = j.at("query_id").get<std::uint64_t>();
  g.timestamp = j.at("timestamp").get<std::uint64_t>();
  for (const auto& it : j.at("items")) {
    Item item;
    item.item_id = it.at("item_id").get<std::uint64_t>();
    item.features = it.at("features").get<std::vector<double>>();
    item.review_rating = it.at("review_rating").get<double>();
    item.is_new = it.at("is_new").get<bool>();
    g.items.push_back(std::move(item));
  }
  for (const auto& row : j.at("labels")) {
    std::vector<Label> labels;
    for (const auto& v : row) {
      if (v.is_null()) {
        labels.emplace_back(std::nullopt);
      } else {
        const int x = v.get<int>();
        if (x != 0 && x != 1) throw InputError("label values must be 0, 1 or null");
        labels.emplace_back(static_cast<std::uint8_t>(x));
      }
    }
    g.labels.push_back(std::move(labels));
  }
  return g;
}

}  // namespace

void write_dataset(const Dataset& dataset, std::ostream& out) {
  out << header_to_json(dataset).dump() << '\n';
  for (const auto& g : dataset.groups) out << group_to_json(g).dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (!j.is_object() || !j.contains("format") || j.at("format") != kFormat) {
          throw ParseError("first line must be a dataset header", line_no);
        }
        if (j.at("version").get<int>() != kVersion) throw ParseError("unsupported dataset version", line_no);
        ds.m = j.at("m").get<std::size_t>();
        ds.K = j.at("K").get<std::size_t>();
        for (const auto& o : j.at("objectives")) {
          ds.objectives.push_back(ObjectiveSpec{o.at("index").get<std::size_t>(), o.at("name").get<std::string>(),
                                                parse_polarity(o.at("polarity").get<std::string>()),
                                                o.at("primary").get<bool>()});
        }
        ds.validate();
        have_header = true;
        continue;
      }
      Dataset one{ds.objectives, {group_from_json(j)}, ds.m, ds.K};
      one.validate();
      ds.groups.push_back(std::move(one.groups.front()));
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("missing dataset header line", line_no == 0 ? 1 : line_no);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  write_dataset(dataset, out);
  if (!out) throw InputError("failed writing " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_dataset(in);
}

std::string serialize_dataset(const Dataset& dataset) {
  std::ostringstream out;
  write_dataset(dataset, out);
  return out.str();
}

std::string dataset_hash(const Dataset& dataset) { return content_hash(serialize_dataset(dataset)); }

}  // namespace distillrank
