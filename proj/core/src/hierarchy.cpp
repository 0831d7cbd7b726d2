#include "refinery/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

namespace refinery {

using nlohmann::json;

Hierarchy Hierarchy::base(int n_classes) {
  if (n_classes < 1) {
    throw Error(ErrorKind::invalid_data, "hierarchy: need >= 1 class");
  }
  Hierarchy h;
  h.levels.emplace_back();
  for (int c = 0; c < n_classes; ++c) {
    h.levels[0].push_back(c);
    h.node_meta[c] = NodeMeta{c, -1};
  }
  return h;
}

int Hierarchy::node_count() const {
  int n = 0;
  for (const auto& level : levels) n += int(level.size());
  return n;
}

FinerLevelResult add_finer_level(const Hierarchy& h, const LabeledDataset& d,
                                 const std::vector<ClusterAssignment>& splits) {
  validate(d);
  if (h.levels.empty()) {
    throw Error(ErrorKind::invalid_data, "add_finer_level: empty hierarchy");
  }
  const auto& leaves = h.levels.back();
  if (splits.size() != leaves.size()) {
    throw Error(ErrorKind::invalid_data,
                "add_finer_level: " + std::to_string(splits.size()) +
                    " assignments for " + std::to_string(leaves.size()) +
                    " leaf classes");
  }
  const auto views = class_views(d);
  if (int(views.size()) != int(leaves.size())) {
    throw Error(ErrorKind::invalid_data,
                "add_finer_level: dataset classes != hierarchy leaves");
  }

  // Finer ids are assigned class-major, cluster-minor.
  std::vector<int> first_finer_id(splits.size() + 1, 0);
  for (std::size_t c = 0; c < splits.size(); ++c) {
    const auto& split = splits[c];
    if (split.class_id != int(c)) {
      throw Error(ErrorKind::invalid_data,
                  "add_finer_level: assignment " + std::to_string(c) +
                      " is for class " + std::to_string(split.class_id));
    }
    if (split.member_of.size() != views[c].sample_indices.size()) {
      throw Error(ErrorKind::invalid_data,
                  "add_finer_level: assignment for class " +
                      std::to_string(c) + " covers " +
                      std::to_string(split.member_of.size()) +
                      " samples, class has " +
                      std::to_string(views[c].sample_indices.size()));
    }
    for (std::size_t s = 0; s < split.sizes.size(); ++s) {
      if (split.sizes[s] == 0) {
        throw Error(ErrorKind::invalid_data,
                    "add_finer_level: empty cluster " + std::to_string(s) +
                        " in class " + std::to_string(c));
      }
    }
    first_finer_id[c + 1] = first_finer_id[c] + split.k;
  }
  const int finer_count = first_finer_id.back();

  FinerAssignment fa;
  fa.finer_class_count = finer_count;
  fa.finer_labels.assign(d.features.n_samples, -1);
  fa.parent_map.resize(finer_count);
  for (std::size_t c = 0; c < splits.size(); ++c) {
    for (int j = 0; j < splits[c].k; ++j) {
      fa.parent_map[first_finer_id[c] + j] = int(c);
    }
    const auto& view = views[c];
    for (std::size_t r = 0; r < view.sample_indices.size(); ++r) {
      fa.finer_labels[view.sample_indices[r]] =
          first_finer_id[c] + splits[c].member_of[r];
    }
  }

  Hierarchy out = h;
  const int id_base = h.node_count();
  out.levels.emplace_back();
  for (int f = 0; f < finer_count; ++f) {
    const int node_id = id_base + f;
    const int parent_class = fa.parent_map[f];
    out.levels.back().push_back(node_id);
    out.edges.emplace_back(leaves[parent_class], node_id);
    out.node_meta[node_id] =
        NodeMeta{parent_class, f - first_finer_id[parent_class]};
  }
  return {std::move(out), std::move(fa)};
}

LabeledDataset relabel_dataset(const LabeledDataset& d,
                               const FinerAssignment& fa) {
  if (fa.finer_labels.size() != d.features.n_samples) {
    throw Error(ErrorKind::invalid_data,
                "relabel_dataset: assignment covers " +
                    std::to_string(fa.finer_labels.size()) +
                    " samples, dataset has " +
                    std::to_string(d.features.n_samples));
  }
  for (std::size_t i = 0; i < fa.finer_labels.size(); ++i) {
    const int f = fa.finer_labels[i];
    if (f < 0 || f >= fa.finer_class_count) {
      throw Error(ErrorKind::invalid_data,
                  "relabel_dataset: sample " + std::to_string(i) +
                      " has no finer label");
    }
    if (fa.parent_map[f] != d.labels[i]) {
      throw Error(ErrorKind::invalid_data,
                  "relabel_dataset: finer label of sample " +
                      std::to_string(i) + " disagrees with its class");
    }
  }
  LabeledDataset out;
  out.features = d.features;
  out.labels = fa.finer_labels;
  out.level = d.level + 1;
  out.class_count = fa.finer_class_count;
  return out;
}

std::vector<std::string> validate_hierarchy(const Hierarchy& h) {
  std::vector<std::string> violations;
  std::map<int, int> level_of;
  for (std::size_t l = 0; l < h.levels.size(); ++l) {
    for (int id : h.levels[l]) {
      if (level_of.count(id)) {
        violations.push_back("node " + std::to_string(id) +
                             " appears in more than one level");
      }
      level_of[id] = int(l);
    }
  }
  std::map<int, int> parent_count;
  for (const auto& [p, c] : h.edges) {
    auto pl = level_of.find(p);
    auto cl = level_of.find(c);
    if (pl == level_of.end() || cl == level_of.end()) {
      violations.push_back("edge (" + std::to_string(p) + ", " +
                           std::to_string(c) + ") references unknown node");
      continue;
    }
    if (cl->second != pl->second + 1) {
      violations.push_back("edge (" + std::to_string(p) + ", " +
                           std::to_string(c) +
                           ") does not connect consecutive levels");
    }
    ++parent_count[c];
  }
  for (std::size_t l = 1; l < h.levels.size(); ++l) {
    for (int id : h.levels[l]) {
      const int count = parent_count.count(id) ? parent_count[id] : 0;
      if (count == 0) {
        violations.push_back("node " + std::to_string(id) + " has no parent");
      } else if (count > 1) {
        violations.push_back("node " + std::to_string(id) + " has " +
                             std::to_string(count) + " parents");
      }
    }
  }
  return violations;
}

void save_hierarchy(const Hierarchy& h, const std::filesystem::path& path) {
  json doc;
  doc["levels"] = h.levels;
  json edges = json::array();
  for (const auto& [p, c] : h.edges) edges.push_back({p, c});
  doc["edges"] = edges;
  json meta = json::object();
  for (const auto& [id, nm] : h.node_meta) {
    meta[std::to_string(id)] = {{"source_class", nm.source_class},
                                {"local_cluster", nm.local_cluster}};
  }
  doc["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string());
  out << doc.dump(2) << "\n";
}

Hierarchy load_hierarchy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
  Hierarchy h;
  try {
    h.levels = doc.at("levels").get<std::vector<std::vector<int>>>();
    for (const auto& e : doc.at("edges")) {
      h.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    for (const auto& [key, value] : doc.at("meta").items()) {
      h.node_meta[std::stoi(key)] =
          NodeMeta{value.at("source_class").get<int>(),
                   value.at("local_cluster").get<int>()};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
  return h;
}

void save_finer_assignment(const FinerAssignment& fa,
                           std::span<const int> specific_labels,
                           const std::filesystem::path& path) {
  if (specific_labels.size() != fa.finer_labels.size()) {
    throw Error(ErrorKind::invalid_data,
                "save_finer_assignment: label length mismatch");
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string());
  out << "sample,specific_class,finer_class\n";
  for (std::size_t i = 0; i < fa.finer_labels.size(); ++i) {
    out << i << "," << specific_labels[i] << "," << fa.finer_labels[i] << "\n";
  }
}

FinerAssignment load_finer_assignment(const std::filesystem::path& path,
                                      std::size_t n_samples) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::format, path.string() + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "sample,specific_class,finer_class") {
    throw Error(ErrorKind::format,
                path.string() + ": unexpected header '" + line + "'");
  }
  FinerAssignment fa;
  fa.finer_labels.assign(n_samples, -1);
  std::vector<int> specific(n_samples, -1);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw Error(ErrorKind::format, path.string() + ": malformed row");
    }
    const long long sample = std::stoll(line.substr(0, c1));
    const int spec = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
    const int finer = std::stoi(line.substr(c2 + 1));
    if (sample < 0 || std::size_t(sample) >= n_samples) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": sample " + std::to_string(sample) +
                      " out of range");
    }
    if (fa.finer_labels[std::size_t(sample)] != -1) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": duplicate sample " +
                      std::to_string(sample));
    }
    fa.finer_labels[std::size_t(sample)] = finer;
    specific[std::size_t(sample)] = spec;
  }
  int max_finer = -1;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (fa.finer_labels[i] < 0) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": sample " + std::to_string(i) +
                      " missing");
    }
    max_finer = std::max(max_finer, fa.finer_labels[i]);
  }
  fa.finer_class_count = max_finer + 1;
  fa.parent_map.assign(fa.finer_class_count, -1);
  for (std::size_t i = 0; i < n_samples; ++i) {
    int& parent = fa.parent_map[fa.finer_labels[i]];
    if (parent == -1) {
      parent = specific[i];
    } else if (parent != specific[i]) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": finer class " +
                      std::to_string(fa.finer_labels[i]) +
                      " spans multiple specific classes");
    }
  }
  for (int f = 0; f < fa.finer_class_count; ++f) {
    if (fa.parent_map[f] == -1) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": finer class " + std::to_string(f) +
                      " has no samples");
    }
  }
  return fa;
}

}  // namespace refinery
