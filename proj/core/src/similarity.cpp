#include "gcgpn/similarity.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include "gcgpn/errors.hpp"
#include "gcgpn/random.hpp"
#include "text_util.hpp"

namespace gcgpn {

SimilarityTable::SimilarityTable(std::vector<std::string> ids, Matrix values)
    : ids_(std::move(ids)), values_(std::move(values)) {
  if (values_.rows() != ids_.size() || values_.cols() != ids_.size()) {
    throw ShapeError("similarity matrix " + shape_string(values_) + " does not match " +
                     std::to_string(ids_.size()) + " class ids");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw ParseError("duplicate class id '" + ids_[i] + "'");
  }
}

std::size_t SimilarityTable::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    throw LookupError("class '" + std::string(id) + "' missing from similarity matrix");
  }
  return it->second;
}

Matrix SimilarityTable::resolve(const std::vector<std::string>& universe) const {
  std::vector<std::size_t> pos;
  pos.reserve(universe.size());
  for (const auto& id : universe) pos.push_back(index_of(id));
  Matrix out(universe.size(), universe.size());
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < pos.size(); ++j) out(i, j) = values_(pos[i], pos[j]);
  return out;
}

void save_similarity(const SimilarityTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "class_id";
  for (const auto& id : table.ids()) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < table.ids().size(); ++i) {
    out << table.ids()[i];
    for (double v : table.values().row(i)) out << ',' << detail::format_double(v);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

SimilarityTable load_similarity(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    for (std::size_t j = 1; j < cells.size(); ++j) header.emplace_back(detail::trim(cells[j]));
    break;
  }
  if (header.empty()) throw ParseError("similarity file has no header row", line_no);
  const std::size_t n = header.size();
  Matrix values(n, n);
  std::vector<std::string> row_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != n + 1) {
      throw ParseError("similarity row has " + std::to_string(cells.size() - 1) + " values, expected " +
                           std::to_string(n),
                       line_no);
    }
    if (row_ids.size() >= n) throw ParseError("more similarity rows than header columns", line_no);
    const std::string id(detail::trim(cells[0]));
    if (id != header[row_ids.size()]) {
      throw ParseError("row id '" + id + "' does not match column id '" + header[row_ids.size()] + "'",
                       line_no);
    }
    for (std::size_t j = 0; j < n; ++j) values(row_ids.size(), j) = detail::parse_double(cells[j + 1], line_no);
    row_ids.push_back(id);
  }
  if (row_ids.size() != n) {
    throw ParseError("similarity matrix has " + std::to_string(row_ids.size()) + " rows, expected " +
                     std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(values(i, j) - values(j, i)) > 1e-9) {
        throw ParseError("similarity matrix is not symmetric at (" + header[i] + ", " + header[j] + ")");
      }
    }
  }
  return SimilarityTable(std::move(header), std::move(values));
}

std::vector<TaxonomyEdge> load_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<TaxonomyEdge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = detail::split(t, '\t');
    if (cells.size() != 2 || detail::trim(cells[0]).empty() || detail::trim(cells[1]).empty()) {
      throw ParseError("expected 'parent<TAB>child'", line_no);
    }
    edges.emplace_back(std::string(detail::trim(cells[0])), std::string(detail::trim(cells[1])));
  }
  return edges;
}

SimilarityTable taxonomy_path_similarity(const std::vector<TaxonomyEdge>& edges,
                                         const std::vector<std::string>& classes) {
  std::unordered_map<std::string, std::size_t> node;
  std::vector<std::vector<std::size_t>> adj;
  auto intern = [&](const std::string& name) {
    auto [it, inserted] = node.emplace(name, adj.size());
    if (inserted) adj.emplace_back();
    return it->second;
  };
  for (const auto& [parent, child] : edges) {
    const std::size_t p = intern(parent);
    const std::size_t c = intern(child);
    adj[p].push_back(c);
    adj[c].push_back(p);
  }

  std::vector<std::size_t> class_nodes;
  for (const auto& id : classes) {
    auto it = node.find(id);
    if (it == node.end()) throw LookupError("class '" + id + "' does not appear in the taxonomy");
    class_nodes.push_back(it->second);
  }

  const std::size_t n = classes.size();
  Matrix sim(n, n);
  constexpr std::size_t unreached = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(adj.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist.begin(), dist.end(), unreached);
    std::queue<std::size_t> frontier;
    dist[class_nodes[i]] = 0;
    frontier.push(class_nodes[i]);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v : adj[u]) {
        if (dist[v] == unreached) {
          dist[v] = dist[u] + 1;
          frontier.push(v);
        }
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t d = dist[class_nodes[j]];
      sim(i, j) = d == unreached ? 0.0 : 1.0 / (1.0 + static_cast<double>(d));
    }
  }
  return SimilarityTable(classes, std::move(sim));
}

Matrix attribute_cosine(const Matrix& attributes) {
  const std::size_t n = attributes.rows();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (double v : attributes.row(i)) sq += v * v;
    if (sq == 0.0) throw Error("attribute vector of class " + std::to_string(i) + " is zero");
    norms[i] = std::sqrt(sq);
  }
  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    sim(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < attributes.cols(); ++c) dot += attributes(i, c) * attributes(j, c);
      sim(i, j) = sim(j, i) = dot / (norms[i] * norms[j]);
    }
  }
  return sim;
}

Matrix permute_similarity(const Matrix& sim, const std::vector<std::size_t>& perm) {
  if (perm.size() != sim.rows() || sim.rows() != sim.cols()) {
    throw ShapeError("permutation of length " + std::to_string(perm.size()) + " for " + shape_string(sim));
  }
  Matrix out(sim.rows(), sim.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < perm.size(); ++j) out(i, j) = sim(perm.at(i), perm.at(j));
  return out;
}

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return random_sample(n, n, rng);
}

}  // namespace gcgpn
