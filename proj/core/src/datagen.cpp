#include "pnp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "pnp/errors.hpp"
#include "pnp/random.hpp"
#include "text_format.hpp"

namespace pnp {

namespace {

constexpr int kMaxDropoutRetries = 16;
constexpr std::string_view kMagic = "pnp-gcd";
constexpr int kFormatVersion = 1;

}  // namespace

LabelledPoints generate_mixture(const MixtureParams& p) {
  if (p.dim < 2) throw ParameterError("generate_mixture: dim must be >= 2");
  if (p.num_classes < 2) throw ParameterError("generate_mixture: need at least 2 classes");
  if (!(p.class_sep > 0.0)) throw ParameterError("generate_mixture: class_sep must be > 0");
  if (!(p.noise_sd >= 0.0)) throw ParameterError("generate_mixture: noise_sd must be >= 0");

  Rng rng = make_rng({p.seed, 0x6d69785552ULL});
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix means(p.num_classes, p.dim);
  for (std::size_t c = 0; c < p.num_classes; ++c) {
    auto row = means.row(c);
    double n = 0.0;
    do {
      for (double& v : row) v = normal(rng);
      n = norm2(row);
    } while (n < 1e-9);
    for (double& v : row) v *= p.class_sep / n;
  }

  const double coord_sd = p.noise_sd / std::sqrt(static_cast<double>(p.dim));
  LabelledPoints out;
  out.num_classes = p.num_classes;
  out.x = Matrix(p.num_classes * p.per_class, p.dim);
  out.labels.reserve(p.num_classes * p.per_class);
  for (std::size_t c = 0; c < p.num_classes; ++c) {
    for (std::size_t i = 0; i < p.per_class; ++i) {
      auto row = out.x.row(c * p.per_class + i);
      auto mean = means.row(c);
      for (std::size_t j = 0; j < p.dim; ++j)
        row[j] = mean[j] + (coord_sd > 0.0 ? coord_sd * normal(rng) : 0.0);
      out.labels.push_back(static_cast<ClassId>(c));
    }
  }
  return out;
}

bool GcdDataset::is_old(ClassId c) const {
  return std::binary_search(old_classes.begin(), old_classes.end(), c);
}

std::size_t GcdDataset::old_index(ClassId c) const {
  auto it = std::lower_bound(old_classes.begin(), old_classes.end(), c);
  if (it == old_classes.end() || *it != c)
    throw ContractViolation("class " + std::to_string(c) + " is not a labelled class");
  return static_cast<std::size_t>(it - old_classes.begin());
}

void GcdDataset::validate() const {
  if (!std::is_sorted(old_classes.begin(), old_classes.end()) ||
      !std::is_sorted(all_classes.begin(), all_classes.end()))
    throw ValidationError("class lists must be sorted");
  if (std::adjacent_find(all_classes.begin(), all_classes.end()) != all_classes.end() ||
      std::adjacent_find(old_classes.begin(), old_classes.end()) != old_classes.end())
    throw ValidationError("class lists contain duplicates");
  if (!std::includes(all_classes.begin(), all_classes.end(), old_classes.begin(),
                     old_classes.end()))
    throw ValidationError("old classes are not a subset of all classes");
  if (old_classes.size() >= all_classes.size())
    throw ValidationError("old classes must be a proper subset of all classes");
  if (labelled_x.rows() != labelled_y.size() || unlabelled_x.rows() != unlabelled_y.size())
    throw ValidationError("row counts do not match label counts");
  if ((labelled_x.rows() > 0 && labelled_x.cols() != dim) ||
      (unlabelled_x.rows() > 0 && unlabelled_x.cols() != dim))
    throw ValidationError("feature width does not match dim");
  for (ClassId c : labelled_y)
    if (!is_old(c))
      throw ValidationError("labelled instance with class " + std::to_string(c) +
                            " outside the old classes");
  for (ClassId c : unlabelled_y)
    if (!std::binary_search(all_classes.begin(), all_classes.end(), c))
      throw ValidationError("unlabelled instance with unknown class " + std::to_string(c));
  if (!labelled_x.all_finite() || !unlabelled_x.all_finite())
    throw ValidationError("non-finite feature value");
}

namespace {

std::vector<double> class_mean(const LabelledPoints& pts, ClassId c) {
  std::vector<double> mean(pts.x.cols(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < pts.x.rows(); ++i) {
    if (pts.labels[i] != c) continue;
    auto row = pts.x.row(i);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
    ++n;
  }
  if (n == 0) throw ParameterError("plant_close_pair: class " + std::to_string(c) + " is empty");
  for (double& v : mean) v /= static_cast<double>(n);
  return mean;
}

}  // namespace

void plant_close_pair(LabelledPoints& points, ClassId anchor, ClassId moved, double angle,
                      std::uint64_t seed) {
  if (anchor == moved) throw ParameterError("plant_close_pair: classes must differ");
  if (!(angle >= 0.0 && angle <= std::numbers::pi))
    throw ParameterError("plant_close_pair: angle must be in [0, pi]");
  if (points.x.cols() < 2) throw ParameterError("plant_close_pair: dim must be >= 2");
  const auto ma = class_mean(points, anchor);
  const auto mb = class_mean(points, moved);
  const double na = norm2(ma);
  const double nb = norm2(mb);
  if (na < 1e-12) throw DegenerateInputError("plant_close_pair: anchor mean is zero");

  // Unit direction orthogonal to the anchor mean.
  Rng rng = make_rng({seed, 0x706c616e74ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = ma.size();
  std::vector<double> w(d);
  double wn = 0.0;
  do {
    for (double& v : w) v = normal(rng);
    const double proj = dot(w, ma) / (na * na);
    for (std::size_t j = 0; j < d; ++j) w[j] -= proj * ma[j];
    wn = norm2(w);
  } while (wn < 1e-9);

  std::vector<double> shift(d);
  for (std::size_t j = 0; j < d; ++j)
    shift[j] = nb * (std::cos(angle) * ma[j] / na + std::sin(angle) * w[j] / wn) - mb[j];
  for (std::size_t i = 0; i < points.x.rows(); ++i) {
    if (points.labels[i] != moved) continue;
    auto row = points.x.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] += shift[j];
  }
}

GcdDataset split_gcd(const LabelledPoints& points, double old_fraction,
                     double labelled_fraction, std::uint64_t seed) {
  if (!(old_fraction > 0.0 && old_fraction <= 1.0))
    throw ParameterError("split_gcd: old_fraction must be in (0, 1]");
  if (!(labelled_fraction > 0.0 && labelled_fraction < 1.0))
    throw ParameterError("split_gcd: labelled_fraction must be in (0, 1)");
  if (points.x.rows() != points.labels.size())
    throw DimensionError("split_gcd: label count does not match rows");

  std::set<ClassId> classes(points.labels.begin(), points.labels.end());
  const std::vector<ClassId> all(classes.begin(), classes.end());
  const auto n_old = static_cast<std::size_t>(
      std::ceil(old_fraction * static_cast<double>(all.size()) - 1e-9));
  const std::vector<ClassId> old(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_old));

  std::vector<bool> to_labelled(points.labels.size(), false);
  Rng rng = make_rng({seed, 0x73706c6974ULL});
  for (ClassId c : old) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < points.labels.size(); ++i)
      if (points.labels[i] == c) members.push_back(i);
    if (members.size() < 2)
      throw SplitError("split_gcd: class " + std::to_string(c) +
                       " has fewer than 2 points; cannot populate both splits");
    shuffle_indices(members, rng);
    auto n_lab = static_cast<std::size_t>(
        std::llround(labelled_fraction * static_cast<double>(members.size())));
    n_lab = std::clamp<std::size_t>(n_lab, 1, members.size() - 1);
    for (std::size_t k = 0; k < n_lab; ++k) to_labelled[members[k]] = true;
  }

  GcdDataset ds;
  ds.dim = points.x.cols();
  ds.old_classes = old;
  ds.all_classes = all;
  std::vector<std::size_t> lab_idx, unl_idx;
  for (std::size_t i = 0; i < points.labels.size(); ++i)
    (to_labelled[i] ? lab_idx : unl_idx).push_back(i);
  ds.labelled_x = points.x.gather_rows(lab_idx);
  ds.unlabelled_x = points.x.gather_rows(unl_idx);
  for (std::size_t i : lab_idx) ds.labelled_y.push_back(points.labels[i]);
  for (std::size_t i : unl_idx) ds.unlabelled_y.push_back(points.labels[i]);
  return ds;
}

std::vector<double> augment_view(std::span<const double> x, const AugmentParams& params,
                                 std::uint64_t stream_seed) {
  if (!(params.dropout_p >= 0.0 && params.dropout_p < 1.0))
    throw ParameterError("augment: dropout_p must be in [0, 1)");
  if (!(params.noise_sd >= 0.0)) throw ParameterError("augment: noise_sd must be >= 0");
  Rng rng(stream_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double coord_sd = params.noise_sd / std::sqrt(static_cast<double>(x.size()));

  std::vector<double> v(x.begin(), x.end());
  if (coord_sd > 0.0)
    for (double& e : v) e += coord_sd * normal(rng);

  if (params.dropout_p > 0.0) {
    std::vector<bool> keep(v.size());
    bool any = false;
    for (int attempt = 0; attempt < kMaxDropoutRetries && !any; ++attempt) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        keep[j] = unif(rng) >= params.dropout_p;
        any = any || keep[j];
      }
    }
    if (!any) throw DegenerateInputError("augment: dropout removed every coordinate");
    for (std::size_t j = 0; j < v.size(); ++j)
      if (!keep[j]) v[j] = 0.0;
  }

  const double n = norm2(v);
  if (n < kNormalizeEps) throw DegenerateInputError("augment: view has near-zero norm");
  for (double& e : v) e /= n;
  return v;
}

ViewPair augment(std::span<const double> x, const AugmentParams& params, ViewSeed seed) {
  ViewPair pair;
  pair.source_index = seed.index;
  pair.view1 = augment_view(x, params, derive_seed({seed.seed, seed.epoch, seed.index, 1}));
  pair.view2 = augment_view(x, params, derive_seed({seed.seed, seed.epoch, seed.index, 2}));
  return pair;
}

// Format:
//   pnp-gcd 1
//   dim <d>
//   old_classes <n> <ids...>
//   all_classes <n> <ids...>
//   labelled <N>
//   unlabelled <M>
//   L <class> <d values>      (N lines)
//   U <class> <d values>      (M lines)
//   end
void write_dataset(std::ostream& out, const GcdDataset& ds) {
  ds.validate();
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "dim " << ds.dim << '\n';
  auto write_classes = [&](const char* key, const std::vector<ClassId>& cs) {
    out << key << ' ' << cs.size();
    for (ClassId c : cs) out << ' ' << c;
    out << '\n';
  };
  write_classes("old_classes", ds.old_classes);
  write_classes("all_classes", ds.all_classes);
  out << "labelled " << ds.num_labelled() << '\n';
  out << "unlabelled " << ds.num_unlabelled() << '\n';
  auto write_rows = [&](char tag, const Matrix& x, const std::vector<ClassId>& y) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      out << tag << ' ' << y[i];
      for (double v : x.row(i)) out << ' ' << text::format_double(v);
      out << '\n';
    }
  };
  write_rows('L', ds.labelled_x, ds.labelled_y);
  write_rows('U', ds.unlabelled_x, ds.unlabelled_y);
  out << "end\n";
}

GcdDataset read_dataset(std::istream& in) {
  std::size_t line_no = 0;
  std::string line;
  auto next = [&](const char* expecting) {
    if (!std::getline(in, line))
      throw ParseError(std::string("unexpected end of file, expected ") + expecting, line_no + 1);
    ++line_no;
    return text::split_ws(line);
  };
  auto expect_key = [&](const std::vector<std::string_view>& toks, std::string_view key,
                        std::size_t min_tokens) {
    if (toks.empty() || toks[0] != key)
      throw ParseError("expected '" + std::string(key) + "'", line_no);
    if (toks.size() < min_tokens) throw ParseError("too few fields", line_no);
  };

  auto toks = next("header");
  if (toks.size() != 2 || toks[0] != kMagic)
    throw ParseError("not a pnp-gcd dataset", line_no);
  if (text::parse_int<int>(toks[1], line_no) != kFormatVersion)
    throw ParseError("unsupported format version", line_no);

  GcdDataset ds;
  toks = next("dim");
  expect_key(toks, "dim", 2);
  ds.dim = text::parse_int<std::size_t>(toks[1], line_no);
  if (ds.dim == 0) throw ParseError("dim must be positive", line_no);

  auto read_classes = [&](const char* key, std::vector<ClassId>& out) {
    auto t = next(key);
    expect_key(t, key, 2);
    const auto n = text::parse_int<std::size_t>(t[1], line_no);
    if (t.size() != n + 2)
      throw ValidationError(std::string(key) + ": header count " + std::to_string(n) +
                            " does not match " + std::to_string(t.size() - 2) + " listed ids");
    for (std::size_t i = 0; i < n; ++i) out.push_back(text::parse_int<ClassId>(t[i + 2], line_no));
  };
  read_classes("old_classes", ds.old_classes);
  read_classes("all_classes", ds.all_classes);

  toks = next("labelled");
  expect_key(toks, "labelled", 2);
  const auto n_lab = text::parse_int<std::size_t>(toks[1], line_no);
  toks = next("unlabelled");
  expect_key(toks, "unlabelled", 2);
  const auto n_unl = text::parse_int<std::size_t>(toks[1], line_no);

  auto read_rows = [&](std::string_view tag, std::size_t n, Matrix& x, std::vector<ClassId>& y) {
    std::vector<double> data;
    data.reserve(n * ds.dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto t = next("record");
      if (t.empty() || t[0] != tag) {
        if (!t.empty() && (t[0] == "end" || t[0] == "U" || t[0] == "L"))
          throw ValidationError("header declares " + std::to_string(n) + " '" +
                                std::string(tag) + "' records but body has " + std::to_string(i));
        throw ParseError("expected '" + std::string(tag) + "' record", line_no);
      }
      if (t.size() != ds.dim + 2)
        throw ParseError("record has " + std::to_string(t.size() - 2) + " values, expected " +
                             std::to_string(ds.dim),
                         line_no);
      y.push_back(text::parse_int<ClassId>(t[1], line_no));
      for (std::size_t j = 0; j < ds.dim; ++j) data.push_back(text::parse_double(t[j + 2], line_no));
    }
    x = Matrix(n, ds.dim, std::move(data));
  };
  read_rows("L", n_lab, ds.labelled_x, ds.labelled_y);
  read_rows("U", n_unl, ds.unlabelled_x, ds.unlabelled_y);

  toks = next("end");
  if (toks.size() != 1 || toks[0] != "end") {
    if (!toks.empty() && (toks[0] == "L" || toks[0] == "U"))
      throw ValidationError("body has more records than the header declares");
    throw ParseError("expected 'end'", line_no);
  }
  ds.validate();
  return ds;
}

void save_dataset(const GcdDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(out, ds);
  if (!out) throw IoError("write failed for " + path.string());
}

GcdDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace pnp
