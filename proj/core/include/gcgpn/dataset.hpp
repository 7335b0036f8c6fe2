#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gcgpn/matrix.hpp"

namespace gcgpn {

enum class Split { train, novel_val, novel_test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

// Which slice of a training class an instance belongs to. Novel classes use
// `train` for every instance (no holdout).
enum class Portion { train, val, test };

struct ClassRecord {
  std::string id;
  Split split = Split::train;
  Matrix instances;  // count x d_in
  // Instances are laid out [train | val | test]: the last holdout_test rows
  // are the seen-class test holdout, the holdout_val rows before them the
  // validation holdout.
  std::size_t holdout_val = 0;
  std::size_t holdout_test = 0;
  std::vector<double> attribute;  // empty when the dataset has no attributes

  std::size_t count() const noexcept { return instances.rows(); }
  // Row indices of one portion, in storage order.
  std::vector<std::size_t> rows(Portion p) const;
};

// Immutable labelled feature-vector dataset. Classes are kept sorted by id,
// which is also the canonical file order.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t d_in, std::size_t d_attr, std::vector<ClassRecord> classes);

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_attr() const noexcept { return d_attr_; }
  bool has_attributes() const noexcept { return d_attr_ > 0; }
  std::size_t num_classes() const noexcept { return classes_.size(); }

  const std::vector<ClassRecord>& classes() const noexcept { return classes_; }
  const ClassRecord& cls(std::size_t i) const { return classes_.at(i); }
  std::size_t index_of(std::string_view id) const;
  std::vector<std::string> class_ids() const;
  std::vector<std::size_t> classes_in(Split s) const;

  // num_classes x d_attr.
  Matrix attribute_matrix() const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  std::size_t d_in_ = 0;
  std::size_t d_attr_ = 0;
  std::vector<ClassRecord> classes_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool operator==(const ClassRecord& a, const ClassRecord& b);

// Directory layout: meta.json, features.csv, attributes.csv (when d_attr > 0).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

struct SyntheticSpec {
  std::size_t n_train = 64;
  std::size_t n_novel_val = 16;
  std::size_t n_novel_test = 20;
  std::size_t d_attr = 16;
  std::size_t d_in = 32;
  std::size_t per_class = 60;
  double noise_scale = 0.7;
  std::uint64_t seed = 0;
  double holdout_val_fraction = 0.10;
  double holdout_test_fraction = 0.25;
};

// Classes get unit attribute vectors; instances are a fixed random affine
// image of the attribute plus isotropic Gaussian noise.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace gcgpn
