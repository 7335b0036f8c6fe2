#include "gcgpn/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "gcgpn/errors.hpp"
#include "text_util.hpp"

namespace gcgpn {

namespace {

constexpr std::string_view kMagic = "gcgpn-checkpoint 1";

void write_rows(std::ostream& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << detail::format_double(m(r, c));
    }
    out << '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) throw ParseError("checkpoint truncated", line_no_ + 1);
    ++line_no_;
    return s;
  }

  std::size_t line_no() const { return line_no_; }

  // Expects "<keyword> <n...>" and returns the numeric fields.
  std::vector<std::size_t> header(std::string_view keyword, std::size_t fields, std::string* name = nullptr) {
    const std::string s = line();
    std::istringstream ss(s);
    std::string word;
    ss >> word;
    if (word != keyword) throw ParseError("expected '" + std::string(keyword) + "', got '" + s + "'", line_no_);
    if (name && !(ss >> *name)) throw ParseError("missing name after '" + std::string(keyword) + "'", line_no_);
    std::vector<std::size_t> out(fields);
    for (auto& v : out) {
      if (!(ss >> v)) throw ParseError("bad '" + std::string(keyword) + "' header", line_no_);
    }
    return out;
  }

  Matrix matrix(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string s = line();
      if (cols == 0) {
        if (!s.empty()) throw ParseError("expected an empty row", line_no_);
        continue;
      }
      const auto parts = detail::split(s, ' ');
      if (parts.size() != cols) {
        throw ParseError("expected " + std::to_string(cols) + " values", line_no_);
      }
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = detail::parse_double(parts[c], line_no_);
    }
    return m;
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  out << kMagic << '\n';
  const auto kv = to_key_values(m.config());
  out << "config " << kv.size() << '\n';
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  out << "universe " << m.universe().size() << '\n';
  for (const auto& id : m.universe()) out << id << '\n';
  out << "seen " << m.seen_classes().size() << '\n';
  for (std::size_t s : m.seen_classes()) out << s << '\n';
  out << "d_in " << m.d_in() << '\n';
  out << "semantic " << m.semantic().rows() << ' ' << m.semantic().cols() << '\n';
  write_rows(out, m.semantic());
  const auto params = m.parameters();
  out << "tensors " << params.size() << '\n';
  for (const Parameter* p : params) {
    out << "tensor " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    write_rows(out, p->value);
  }
  if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  Reader rd(in);
  if (rd.line() != kMagic) throw ParseError("not a gcgpn checkpoint", 1);

  std::map<std::string, std::string> kv;
  const std::size_t n_config = rd.header("config", 1)[0];
  for (std::size_t i = 0; i < n_config; ++i) {
    const std::string s = rd.line();
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", rd.line_no());
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  ModelConfig cfg = model_config_from_key_values(kv);

  std::vector<std::string> universe(rd.header("universe", 1)[0]);
  for (auto& id : universe) id = rd.line();
  std::vector<std::size_t> seen(rd.header("seen", 1)[0]);
  for (auto& s : seen) {
    const std::string line = rd.line();
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), s);
    if (ec != std::errc{} || ptr != line.data() + line.size()) {
      throw ParseError("bad seen class index '" + line + "'", rd.line_no());
    }
  }
  const std::size_t d_in = rd.header("d_in", 1)[0];
  const auto sem_shape = rd.header("semantic", 2);
  Matrix semantic = rd.matrix(sem_shape[0], sem_shape[1]);

  Model m(std::move(cfg), std::move(universe), std::move(seen), d_in, std::move(semantic), 0);
  auto params = m.parameters();
  const std::size_t n_tensors = rd.header("tensors", 1)[0];
  if (n_tensors != params.size()) {
    throw ParseError("checkpoint holds " + std::to_string(n_tensors) + " tensors, model expects " +
                         std::to_string(params.size()),
                     rd.line_no());
  }
  for (Parameter* p : params) {
    std::string name;
    const auto shape = rd.header("tensor", 2, &name);
    if (name != p->name || shape[0] != p->value.rows() || shape[1] != p->value.cols()) {
      throw ParseError("tensor '" + name + "' does not match expected '" + p->name + "' " +
                           shape_string(p->value),
                       rd.line_no());
    }
    p->value = rd.matrix(shape[0], shape[1]);
  }
  return m;
}

}  // namespace gcgpn
