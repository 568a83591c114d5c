#include "pnp/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "pnp/errors.hpp"
#include "text_format.hpp"

namespace pnp {

namespace {

constexpr std::string_view kMagic = "pnp-checkpoint";
constexpr int kFormatVersion = 1;

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << text::format_double(m(r, c));
    }
    out << '\n';
  }
}

void write_mlp(std::ostream& out, const std::string& prefix, const Mlp& net) {
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    write_matrix(out, weight_id(prefix, i), net.layers()[i].weight);
    write_matrix(out, bias_id(prefix, i), net.layers()[i].bias);
  }
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string_view> next() {
    while (std::getline(in_, buf_)) {
      ++line_;
      auto toks = text::split_ws(buf_);
      if (!toks.empty()) return toks;
    }
    throw ParseError("unexpected end of checkpoint", line_);
  }
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t line_ = 0;
};

Mlp take_mlp(std::map<std::string, Matrix>& mats, const std::string& prefix) {
  std::vector<Linear> layers;
  for (std::size_t i = 0;; ++i) {
    auto w = mats.find(weight_id(prefix, i));
    auto b = mats.find(bias_id(prefix, i));
    if (w == mats.end() && b == mats.end()) break;
    if (w == mats.end() || b == mats.end())
      throw ParseError("checkpoint: incomplete layer " + prefix + "." + std::to_string(i), 0);
    layers.push_back(Linear{std::move(w->second), std::move(b->second)});
    mats.erase(w);
    mats.erase(b);
  }
  if (layers.empty()) throw ParseError("checkpoint: missing network '" + prefix + "'", 0);
  try {
    return Mlp(std::move(layers));
  } catch (const DimensionError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
}

Matrix take_matrix(std::map<std::string, Matrix>& mats, const std::string& name) {
  auto it = mats.find(name);
  if (it == mats.end()) throw ParseError("checkpoint: missing matrix '" + name + "'", 0);
  Matrix m = std::move(it->second);
  mats.erase(it);
  return m;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ProberState& state) {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "epoch " << state.epoch << '\n';
  out << "step " << state.step << '\n';
  write_mlp(out, kEncoderPrefix, state.encoder);
  write_mlp(out, "teacher_encoder", state.teacher_encoder);
  write_mlp(out, kHeadPrefix, state.head);
  write_matrix(out, "potential_pool", state.bank.potential_pool);
  write_matrix(out, kLabelledProtosId, state.bank.labelled_protos);
  out << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, const ProberState& state) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, state);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ProberState read_checkpoint(std::istream& in) {
  LineReader reader(in);
  auto toks = reader.next();
  if (toks.size() != 2 || toks[0] != kMagic)
    throw ParseError("not a checkpoint file", reader.line());
  if (text::parse_int<int>(toks[1], reader.line()) != kFormatVersion)
    throw ParseError("unsupported checkpoint version", reader.line());

  ProberState state;
  bool have_epoch = false, have_step = false;
  std::map<std::string, Matrix> mats;
  for (;;) {
    toks = reader.next();
    const std::size_t line = reader.line();
    if (toks[0] == "end" && toks.size() == 1) break;
    if (toks[0] == "epoch" && toks.size() == 2) {
      state.epoch = text::parse_int<std::size_t>(toks[1], line);
      have_epoch = true;
    } else if (toks[0] == "step" && toks.size() == 2) {
      state.step = text::parse_int<std::uint64_t>(toks[1], line);
      have_step = true;
    } else if (toks[0] == "matrix" && toks.size() == 4) {
      std::string name(toks[1]);
      const auto rows = text::parse_int<std::size_t>(toks[2], line);
      const auto cols = text::parse_int<std::size_t>(toks[3], line);
      if (mats.count(name)) throw ParseError("duplicate matrix '" + name + "'", line);
      Matrix m(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        auto vals = reader.next();
        if (vals.size() != cols)
          throw ParseError("matrix '" + name + "': expected " + std::to_string(cols) + " values",
                           reader.line());
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = text::parse_double(vals[c], reader.line());
      }
      mats.emplace(std::move(name), std::move(m));
    } else {
      throw ParseError("unrecognized checkpoint line", line);
    }
  }
  if (!have_epoch || !have_step) throw ParseError("checkpoint: missing epoch or step", reader.line());

  state.encoder = take_mlp(mats, kEncoderPrefix);
  state.teacher_encoder = take_mlp(mats, "teacher_encoder");
  state.head = take_mlp(mats, kHeadPrefix);
  state.bank.potential_pool = take_matrix(mats, "potential_pool");
  state.bank.labelled_protos = take_matrix(mats, kLabelledProtosId);
  state.bank.buffer_size = state.bank.potential_pool.rows();
  if (!mats.empty()) throw ParseError("checkpoint: unknown matrix '" + mats.begin()->first + "'", 0);
  return state;
}

ProberState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace pnp
