#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gcgpn/matrix.hpp"

namespace gcgpn {

// Square class-similarity matrix keyed by class id.
class SimilarityTable {
 public:
  SimilarityTable() = default;
  SimilarityTable(std::vector<std::string> ids, Matrix values);

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Matrix& values() const noexcept { return values_; }
  std::size_t index_of(std::string_view id) const;

  // Re-indexes onto `universe`; throws LookupError naming the first missing id.
  Matrix resolve(const std::vector<std::string>& universe) const;

 private:
  std::vector<std::string> ids_;
  Matrix values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// CSV with a header row and a leading id column. Loading validates
// squareness and symmetry within 1e-9.
void save_similarity(const SimilarityTable& table, const std::filesystem::path& path);
SimilarityTable load_similarity(const std::filesystem::path& path);

using TaxonomyEdge = std::pair<std::string, std::string>;  // (parent, child)

// One `parent<TAB>child` edge per line; blank lines and '#' comments skipped.
std::vector<TaxonomyEdge> load_taxonomy(const std::filesystem::path& path);

// sim(i, j) = 1 / (1 + hops(i, j)) over the undirected taxonomy graph;
// disconnected pairs get 0.
SimilarityTable taxonomy_path_similarity(const std::vector<TaxonomyEdge>& edges,
                                         const std::vector<std::string>& classes);

// Pairwise cosine of attribute rows; a zero attribute row is an error.
Matrix attribute_cosine(const Matrix& attributes);

// sim'(i, j) = sim(perm[i], perm[j]).
Matrix permute_similarity(const Matrix& sim, const std::vector<std::size_t>& perm);
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);

}  // namespace gcgpn
