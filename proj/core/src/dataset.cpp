#include "fcgnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "fcgnn/error.hpp"
#include "fcgnn/rng.hpp"

namespace fcgnn {

namespace fs = std::filesystem;

void LabeledGraphSet::validate() const {
  if (labels.size() != graphs.size() || source_ids.size() != graphs.size()) {
    throw DataError("graph, label and source id counts differ");
  }
  for (std::size_t i = 1; i < class_names.size(); ++i) {
    if (!(class_names[i - 1] < class_names[i])) throw DataError("class names must be unique and sorted");
  }
  for (std::size_t l : labels) {
    if (l >= class_names.size()) throw DataError("label " + std::to_string(l) + " out of range");
  }
}

LabeledGraphSet LabeledGraphSet::subset(const std::vector<std::size_t>& indices) const {
  LabeledGraphSet out;
  out.class_names = class_names;
  for (std::size_t i : indices) {
    out.graphs.push_back(graphs.at(i));
    out.labels.push_back(labels.at(i));
    out.source_ids.push_back(source_ids.at(i));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

// Parses the next unsigned integer token starting at `pos`; returns false if
// the token is missing or malformed.
bool next_uint(const std::string& line, std::size_t& pos, std::uint64_t& value) {
  while (pos < line.size() && is_space(line[pos])) ++pos;
  const std::size_t start = pos;
  while (pos < line.size() && !is_space(line[pos])) ++pos;
  if (start == pos) return false;
  const char* first = line.data() + start;
  const char* last = line.data() + pos;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

ParsedEdgeList parse_edge_list(std::istream& in, const std::string& source_name) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t pos = 0;
    while (pos < line.size() && is_space(line[pos])) ++pos;
    if (pos == line.size() || line[pos] == '#') continue;
    std::uint64_t u = 0;
    std::uint64_t v = 0;
    std::size_t cursor = pos;
    const bool ok = next_uint(line, cursor, u) && next_uint(line, cursor, v);
    while (ok && cursor < line.size() && is_space(line[cursor])) ++cursor;
    if (!ok || cursor != line.size()) {
      throw DataError(source_name + ":" + std::to_string(line_no) + ": expected two non-negative integers, got '" +
                      line + "'");
    }
    raw.emplace_back(u, v);
  }
  if (in.bad()) throw DataError(source_name + ": read error");
  if (raw.empty()) throw DataError(source_name + ": no edges");

  ParsedEdgeList out;
  std::set<std::uint64_t> ids;
  for (const auto& [u, v] : raw) {
    ids.insert(u);
    ids.insert(v);
  }
  out.original_ids.assign(ids.begin(), ids.end());
  auto dense = [&out](std::uint64_t id) {
    return static_cast<NodeId>(std::lower_bound(out.original_ids.begin(), out.original_ids.end(), id) -
                               out.original_ids.begin());
  };
  std::vector<Edge> edges;
  edges.reserve(raw.size());
  for (const auto& [u, v] : raw) edges.emplace_back(dense(u), dense(v));
  out.graph = Graph::from_edge_list(edges, out.original_ids.size());
  return out;
}

ParsedEdgeList read_edge_list_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  return parse_edge_list(in, path.string());
}

LabeledGraphSet load_malnet_dir(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DataError("dataset root " + root.string() + " is not a directory");

  std::vector<fs::path> families;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) families.push_back(entry.path());
  }
  std::sort(families.begin(), families.end());
  if (families.empty()) throw DataError("dataset root " + root.string() + " contains no family directories");

  LabeledGraphSet set;
  std::vector<fs::path> files;
  for (std::size_t label = 0; label < families.size(); ++label) {
    std::vector<fs::path> family_files;
    for (const auto& entry : fs::recursive_directory_iterator(families[label])) {
      if (entry.is_regular_file() && entry.path().extension() == ".edgelist") {
        family_files.push_back(entry.path());
      }
    }
    if (family_files.empty()) {
      throw DataError("family directory " + families[label].string() + " contains no .edgelist files");
    }
    std::sort(family_files.begin(), family_files.end());
    set.class_names.push_back(families[label].filename().string());
    for (auto& f : family_files) {
      set.labels.push_back(label);
      set.source_ids.push_back(fs::relative(f, root).generic_string());
      files.push_back(std::move(f));
    }
  }

  set.graphs.resize(files.size());
  std::vector<std::exception_ptr> errors(files.size());
  const auto count = static_cast<std::ptrdiff_t>(files.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      set.graphs[i] = read_edge_list_file(files[i]).graph;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  set.validate();
  return set;
}

void write_malnet_dir(const LabeledGraphSet& set, const fs::path& root) {
  set.validate();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const fs::path dir = root / set.class_names[set.labels[i]];
    fs::create_directories(dir);
    std::ostringstream name;
    name << std::setw(6) << std::setfill('0') << i << ".edgelist";
    std::ofstream out(dir / name.str());
    if (!out) throw DataError("cannot write " + (dir / name.str()).string());
    out << "# " << set.source_ids[i] << "\n";
    const Graph& g = set.graphs[i];
    for (const auto& [u, v] : g.edge_list()) out << u << ' ' << v << '\n';
    // Isolated nodes have no edge line; a self-loop line keeps them.
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (g.degree(v) == 0) out << v << ' ' << v << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

DatasetSplit stratified_split(const LabeledGraphSet& set, const SplitRatios& ratios, std::uint64_t seed) {
  const double shares[3] = {ratios.train, ratios.val, ratios.test};
  for (double r : shares) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("split ratios must be non-negative");
  }
  if (!(ratios.train > 0.0)) throw ConfigError("train split ratio must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  set.validate();
  const std::size_t positive = static_cast<std::size_t>(shares[0] > 0) + (shares[1] > 0) + (shares[2] > 0);

  std::vector<std::vector<std::size_t>> by_class(set.num_classes());
  for (std::size_t i = 0; i < set.size(); ++i) by_class[set.labels[i]].push_back(i);

  DatasetSplit split;
  split.seed = seed;
  std::vector<std::size_t>* targets[3] = {&split.train_idx, &split.val_idx, &split.test_idx};
  Rng rng(derive_seed(seed, "split"));
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    const std::size_t n = members.size();
    if (n < positive) {
      throw DataError("class '" + set.class_names[c] + "' has " + std::to_string(n) +
                      " samples, fewer than the " + std::to_string(positive) + " non-empty splits");
    }
    rng.shuffle(std::span<std::size_t>(members));

    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = shares[s] * static_cast<double>(n);
      counts[s] = static_cast<std::size_t>(std::floor(exact));
      remainders[s] = exact - std::floor(exact);
      assigned += counts[s];
    }
    while (assigned < n) {
      int best = -1;
      for (int s = 0; s < 3; ++s) {
        if (shares[s] > 0 && (best < 0 || remainders[s] > remainders[best])) best = s;
      }
      ++counts[best];
      remainders[best] = -1.0;
      ++assigned;
    }
    for (int s = 0; s < 3; ++s) {
      if (shares[s] > 0 && counts[s] == 0) {
        int donor = 0;
        for (int t = 1; t < 3; ++t) {
          if (counts[t] > counts[donor]) donor = t;
        }
        --counts[donor];
        ++counts[s];
      }
    }
    std::size_t offset = 0;
    for (int s = 0; s < 3; ++s) {
      targets[s]->insert(targets[s]->end(), members.begin() + offset, members.begin() + offset + counts[s]);
      offset += counts[s];
    }
  }
  for (auto* t : targets) std::sort(t->begin(), t->end());
  return split;
}

// ---------------------------------------------------------------------------

namespace {

Graph preferential_attachment(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<Edge> edges;
  std::vector<NodeId> endpoints;  // each node repeated once per incident edge
  for (NodeId u = 0; u <= m; ++u) {
    for (NodeId v = u + 1; v <= m; ++v) {
      edges.emplace_back(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  }
  std::vector<NodeId> chosen;
  for (auto t = static_cast<NodeId>(m + 1); t < n; ++t) {
    chosen.clear();
    while (chosen.size() < m) {
      const NodeId target = endpoints[rng.below(endpoints.size())];
      if (std::find(chosen.begin(), chosen.end(), target) == chosen.end()) chosen.push_back(target);
    }
    for (NodeId target : chosen) {
      edges.emplace_back(t, target);
      endpoints.push_back(t);
      endpoints.push_back(target);
    }
  }
  return Graph::from_edge_list(edges, n);
}

Graph near_tree(std::size_t n, std::size_t extra, Rng& rng) {
  std::set<Edge> edges;
  for (NodeId v = 1; v < n; ++v) {
    const auto parent = static_cast<NodeId>(rng.below(v));
    edges.emplace(parent, v);
  }
  std::size_t added = 0;
  while (added < extra) {
    auto u = static_cast<NodeId>(rng.below(n));
    auto v = static_cast<NodeId>(rng.below(n));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (edges.emplace(u, v).second) ++added;
  }
  std::vector<Edge> list(edges.begin(), edges.end());
  return Graph::from_edge_list(list, n);
}

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

}  // namespace

LabeledGraphSet synth_families(std::size_t per_class, std::uint64_t seed) {
  if (per_class < 1) throw ConfigError("synthetic corpus needs at least one graph per class");
  LabeledGraphSet set;
  set.class_names = {"addisplay", "adware", "benign", "downloader", "trojan"};
  Rng rng(derive_seed(seed, "synth"));
  for (std::size_t label = 0; label < set.class_names.size(); ++label) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Graph g;
      switch (label) {
        case 0: g = preferential_attachment(uniform_size(rng, 20, 50), 2, rng); break;
        case 1: g = preferential_attachment(uniform_size(rng, 25, 55), 3, rng); break;
        case 2: g = preferential_attachment(uniform_size(rng, 20, 45), 4, rng); break;
        case 3: {
          const double drawn = std::round(51.0 + 4.9 * rng.normal());
          const auto n = static_cast<std::size_t>(std::clamp(drawn, 40.0, 117.0));
          const auto extra = static_cast<std::size_t>(std::round(0.14 * static_cast<double>(n) + 1.0));
          g = near_tree(n, extra, rng);
          break;
        }
        default: g = preferential_attachment(uniform_size(rng, 15, 40), 5, rng); break;
      }
      set.graphs.push_back(std::move(g));
      set.labels.push_back(label);
      set.source_ids.push_back("synthetic/" + set.class_names[label] + "/" + std::to_string(i));
    }
  }
  return set;
}

// ---------------------------------------------------------------------------

SummaryStats summarize(std::vector<double> values) {
  if (values.empty()) throw DataError("cannot summarize an empty list");
  std::sort(values.begin(), values.end());
  SummaryStats s;
  s.min = values.front();
  s.max = values.back();
  s.median = values[(values.size() - 1) / 2];
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

FamilyStats family_stats(const LabeledGraphSet& set) {
  set.validate();
  if (set.size() == 0) throw DataError("cannot compute statistics of an empty dataset");
  FamilyStats stats;
  for (std::size_t c = 0; c < set.num_classes(); ++c) {
    std::vector<double> vertices;
    std::vector<double> edges;
    double degree_sum = 0.0;
    double ratio_sum = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.labels[i] != c) continue;
      const auto n = static_cast<double>(set.graphs[i].num_nodes());
      const auto e = static_cast<double>(set.graphs[i].num_edges());
      vertices.push_back(n);
      edges.push_back(e);
      if (n > 0) {
        degree_sum += 2.0 * e / n;
        ratio_sum += e / n;
      }
    }
    if (vertices.empty()) throw DataError("class '" + set.class_names[c] + "' has no graphs");
    FamilyRow row;
    row.family = set.class_names[c];
    row.graphs = vertices.size();
    row.average_degree = degree_sum / static_cast<double>(vertices.size());
    row.edges_per_node = ratio_sum / static_cast<double>(vertices.size());
    row.vertices = summarize(std::move(vertices));
    row.edges = summarize(std::move(edges));
    stats.rows.push_back(std::move(row));
  }
  return stats;
}

void print_family_stats(std::ostream& out, const FamilyStats& stats) {
  out << std::left << std::setw(14) << "family" << std::right << std::setw(8) << "graphs"
      << std::setw(8) << "v_min" << std::setw(8) << "v_max" << std::setw(9) << "v_median" << std::setw(10)
      << "v_sigma" << std::setw(8) << "e_min" << std::setw(8) << "e_max" << std::setw(9) << "e_median"
      << std::setw(10) << "e_sigma" << std::setw(9) << "avg_deg" << std::setw(11) << "edges/node" << '\n';
  out << std::fixed;
  for (const auto& r : stats.rows) {
    out << std::left << std::setw(14) << r.family << std::right << std::setw(8) << r.graphs
        << std::setprecision(0) << std::setw(8) << r.vertices.min << std::setw(8) << r.vertices.max
        << std::setw(9) << r.vertices.median << std::setprecision(1) << std::setw(10) << r.vertices.stddev
        << std::setprecision(0) << std::setw(8) << r.edges.min << std::setw(8) << r.edges.max << std::setw(9)
        << r.edges.median << std::setprecision(1) << std::setw(10) << r.edges.stddev << std::setprecision(3)
        << std::setw(9) << r.average_degree << std::setw(11) << r.edges_per_node << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void write_family_stats_csv(std::ostream& out, const FamilyStats& stats) {
  out << "family,graphs,vertices_min,vertices_max,vertices_median,vertices_sigma,edges_min,edges_max,"
         "edges_median,edges_sigma,average_degree,edges_per_node\n";
  out << std::setprecision(17);
  for (const auto& r : stats.rows) {
    out << r.family << ',' << r.graphs << ',' << r.vertices.min << ',' << r.vertices.max << ','
        << r.vertices.median << ',' << r.vertices.stddev << ',' << r.edges.min << ',' << r.edges.max << ','
        << r.edges.median << ',' << r.edges.stddev << ',' << r.average_degree << ',' << r.edges_per_node << '\n';
  }
}

}  // namespace fcgnn
