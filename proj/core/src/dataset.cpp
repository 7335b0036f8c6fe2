#include "gcgpn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gcgpn/errors.hpp"
#include "gcgpn/random.hpp"
#include "text_util.hpp"

namespace gcgpn {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::novel_val: return "novel_val";
    case Split::novel_test: return "novel_test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "novel_val") return Split::novel_val;
  if (s == "novel_test") return Split::novel_test;
  throw ParseError("unknown split tag '" + std::string(s) + "'");
}

std::vector<std::size_t> ClassRecord::rows(Portion p) const {
  const std::size_t n = count();
  const std::size_t train_end = n - holdout_val - holdout_test;
  std::size_t begin = 0;
  std::size_t end = train_end;
  if (p == Portion::val) {
    begin = train_end;
    end = train_end + holdout_val;
  } else if (p == Portion::test) {
    begin = train_end + holdout_val;
    end = n;
  }
  std::vector<std::size_t> out(end - begin);
  std::iota(out.begin(), out.end(), begin);
  return out;
}

bool operator==(const ClassRecord& a, const ClassRecord& b) {
  return a.id == b.id && a.split == b.split && a.instances == b.instances &&
         a.holdout_val == b.holdout_val && a.holdout_test == b.holdout_test &&
         a.attribute == b.attribute;
}

Dataset::Dataset(std::size_t d_in, std::size_t d_attr, std::vector<ClassRecord> classes)
    : d_in_(d_in), d_attr_(d_attr), classes_(std::move(classes)) {
  std::sort(classes_.begin(), classes_.end(),
            [](const ClassRecord& a, const ClassRecord& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const ClassRecord& c = classes_[i];
    if (!index_.emplace(c.id, i).second) throw ParseError("duplicate class id '" + c.id + "'");
    if (c.instances.cols() != d_in_ && c.count() > 0) {
      throw ShapeError("class '" + c.id + "' has feature dimension " +
                       std::to_string(c.instances.cols()) + ", expected " + std::to_string(d_in_));
    }
    if (c.attribute.size() != d_attr_) {
      throw ShapeError("class '" + c.id + "' has attribute dimension " +
                       std::to_string(c.attribute.size()) + ", expected " + std::to_string(d_attr_));
    }
    if (c.holdout_val + c.holdout_test > c.count()) {
      throw ShapeError("class '" + c.id + "' holds out more instances than it has");
    }
    if (c.split != Split::train && (c.holdout_val != 0 || c.holdout_test != 0)) {
      throw ShapeError("novel class '" + c.id + "' cannot carry seen-class holdouts");
    }
  }
}

std::size_t Dataset::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw LookupError("unknown class id '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> Dataset::class_ids() const {
  std::vector<std::string> ids;
  ids.reserve(classes_.size());
  for (const auto& c : classes_) ids.push_back(c.id);
  return ids;
}

std::vector<std::size_t> Dataset::classes_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].split == s) out.push_back(i);
  }
  return out;
}

Matrix Dataset::attribute_matrix() const {
  Matrix m(classes_.size(), d_attr_);
  for (std::size_t i = 0; i < classes_.size(); ++i)
    std::copy(classes_[i].attribute.begin(), classes_[i].attribute.end(), m.row(i).begin());
  return m;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.d_in_ == b.d_in_ && a.d_attr_ == b.d_attr_ && a.classes_ == b.classes_;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ParseError("cannot open " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json meta;
  meta["format"] = "gcgpn-dataset";
  meta["version"] = 1;
  meta["d_in"] = ds.d_in();
  meta["d_attr"] = ds.d_attr();
  meta["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : ds.classes()) {
    meta["classes"].push_back({{"id", c.id},
                               {"split", std::string(to_string(c.split))},
                               {"count", c.count()},
                               {"holdout_val", c.holdout_val},
                               {"holdout_test", c.holdout_test}});
  }
  {
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << '\n';
    if (!out) throw Error("failed writing " + (dir / "meta.json").string());
  }
  {
    std::ofstream out(dir / "features.csv");
    for (const auto& c : ds.classes()) {
      for (std::size_t r = 0; r < c.count(); ++r) {
        out << c.id;
        for (double v : c.instances.row(r)) out << ',' << detail::format_double(v);
        out << '\n';
      }
    }
    if (!out) throw Error("failed writing " + (dir / "features.csv").string());
  }
  if (ds.has_attributes()) {
    std::ofstream out(dir / "attributes.csv");
    for (const auto& c : ds.classes()) {
      out << c.id;
      for (double v : c.attribute) out << ',' << detail::format_double(v);
      out << '\n';
    }
    if (!out) throw Error("failed writing " + (dir / "attributes.csv").string());
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json meta;
  {
    std::ifstream in(dir / "meta.json");
    if (!in) throw ParseError("cannot open " + (dir / "meta.json").string());
    try {
      meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("meta.json: ") + e.what());
    }
  }
  std::size_t d_in = 0;
  std::size_t d_attr = 0;
  std::vector<ClassRecord> classes;
  std::unordered_map<std::string, std::size_t> by_id;
  try {
    if (meta.value("format", "") != "gcgpn-dataset") throw ParseError("meta.json: bad format header");
    d_in = meta.at("d_in").get<std::size_t>();
    d_attr = meta.at("d_attr").get<std::size_t>();
    for (const auto& jc : meta.at("classes")) {
      ClassRecord c;
      c.id = jc.at("id").get<std::string>();
      c.split = parse_split(jc.at("split").get<std::string>());
      c.instances = Matrix(0, d_in);
      c.holdout_val = jc.value("holdout_val", std::size_t{0});
      c.holdout_test = jc.value("holdout_test", std::size_t{0});
      const std::size_t count = jc.at("count").get<std::size_t>();
      c.instances = Matrix(count, d_in);
      by_id.emplace(c.id, classes.size());
      classes.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("meta.json: ") + e.what());
  }

  std::vector<std::size_t> filled(classes.size(), 0);
  const auto features = read_lines(dir / "features.csv");
  for (std::size_t ln = 0; ln < features.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    if (detail::trim(features[ln]).empty()) continue;
    const auto cells = detail::split(features[ln], ',');
    const std::string id(detail::trim(cells[0]));
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ParseError("features.csv: unknown class id '" + id + "'", line_no);
    if (cells.size() != d_in + 1) {
      throw ParseError("features.csv: expected " + std::to_string(d_in) + " values, got " +
                           std::to_string(cells.size() - 1),
                       line_no);
    }
    ClassRecord& c = classes[it->second];
    std::size_t& row = filled[it->second];
    if (row >= c.count()) {
      throw ParseError("features.csv: more instances for '" + id + "' than declared", line_no);
    }
    for (std::size_t j = 0; j < d_in; ++j) c.instances(row, j) = detail::parse_double(cells[j + 1], line_no);
    ++row;
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (filled[i] != classes[i].count()) {
      throw ParseError("features.csv: class '" + classes[i].id + "' has " +
                       std::to_string(filled[i]) + " instances, meta.json declares " +
                       std::to_string(classes[i].count()));
    }
  }

  if (d_attr > 0) {
    const auto attrs = read_lines(dir / "attributes.csv");
    std::vector<bool> seen(classes.size(), false);
    for (std::size_t ln = 0; ln < attrs.size(); ++ln) {
      const std::size_t line_no = ln + 1;
      if (detail::trim(attrs[ln]).empty()) continue;
      const auto cells = detail::split(attrs[ln], ',');
      const std::string id(detail::trim(cells[0]));
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ParseError("attributes.csv: unknown class id '" + id + "'", line_no);
      if (cells.size() != d_attr + 1) {
        throw ParseError("attributes.csv: expected " + std::to_string(d_attr) + " values, got " +
                             std::to_string(cells.size() - 1),
                         line_no);
      }
      if (seen[it->second]) throw ParseError("attributes.csv: duplicate row for '" + id + "'", line_no);
      seen[it->second] = true;
      auto& attr = classes[it->second].attribute;
      attr.resize(d_attr);
      for (std::size_t j = 0; j < d_attr; ++j) attr[j] = detail::parse_double(cells[j + 1], line_no);
    }
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (!seen[i]) throw ParseError("attributes.csv: missing class '" + classes[i].id + "'");
    }
  }
  return Dataset(d_in, d_attr, std::move(classes));
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_train == 0 || spec.n_novel_val == 0 || spec.n_novel_test == 0 || spec.d_attr == 0 ||
      spec.d_in == 0 || spec.per_class == 0) {
    throw ConfigError("synthetic dataset counts and dimensions must be positive");
  }
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Fixed affine map attribute space -> input space.
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(spec.d_attr));
  Matrix weights(spec.d_in, spec.d_attr);
  for (double& v : weights.data()) v = normal(rng) * map_scale;
  std::vector<double> offset(spec.d_in);
  for (double& v : offset) v = normal(rng) * map_scale;

  const std::size_t total = spec.n_train + spec.n_novel_val + spec.n_novel_test;
  const std::size_t n_val = static_cast<std::size_t>(
      std::lround(spec.holdout_val_fraction * static_cast<double>(spec.per_class)));
  const std::size_t n_test = static_cast<std::size_t>(
      std::lround(spec.holdout_test_fraction * static_cast<double>(spec.per_class)));

  std::vector<ClassRecord> classes;
  classes.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    ClassRecord c;
    char id[32];
    std::snprintf(id, sizeof(id), "c%03zu", k);
    c.id = id;
    c.split = k < spec.n_train ? Split::train
              : k < spec.n_train + spec.n_novel_val ? Split::novel_val
                                                    : Split::novel_test;
    c.attribute.resize(spec.d_attr);
    double sq = 0.0;
    do {
      sq = 0.0;
      for (double& v : c.attribute) {
        v = normal(rng);
        sq += v * v;
      }
    } while (sq == 0.0);
    for (double& v : c.attribute) v /= std::sqrt(sq);

    std::vector<double> mean(offset);
    for (std::size_t i = 0; i < spec.d_in; ++i)
      for (std::size_t j = 0; j < spec.d_attr; ++j) mean[i] += weights(i, j) * c.attribute[j];

    c.instances = Matrix(spec.per_class, spec.d_in);
    for (std::size_t r = 0; r < spec.per_class; ++r)
      for (std::size_t i = 0; i < spec.d_in; ++i)
        c.instances(r, i) = mean[i] + spec.noise_scale * normal(rng);
    if (c.split == Split::train) {
      c.holdout_val = n_val;
      c.holdout_test = n_test;
    }
    classes.push_back(std::move(c));
  }
  return Dataset(spec.d_in, spec.d_attr, std::move(classes));
}

}  // namespace gcgpn
