#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "pnp/numerics.hpp"

namespace pnp {

using ClassId = int;

struct LabelledPoints {
  Matrix x;                     // one point per row
  std::vector<ClassId> labels;  // class of each row
  std::size_t num_classes = 0;
};

// Gaussian mixture with class means on a sphere. Noise scales are RMS norms:
// the noise vector added to a point has expected squared norm noise_sd².
struct MixtureParams {
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  std::size_t per_class = 100;
  double class_sep = 6.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

LabelledPoints generate_mixture(const MixtureParams& params);

/// Moves every point of class `moved` rigidly so that its empirical mean sits
/// at `angle` radians from the mean of class `anchor`, keeping its norm. The
/// rotation plane is drawn from `seed`. Used to plant pairs of classes that
/// similarity-graph clustering tends to merge.
void plant_close_pair(LabelledPoints& points, ClassId anchor, ClassId moved, double angle,
                      std::uint64_t seed);

/// Labelled/unlabelled split of a dataset. Hidden labels of the unlabelled
/// part are kept only for evaluation.
struct GcdDataset {
  std::size_t dim = 0;
  Matrix labelled_x;
  std::vector<ClassId> labelled_y;
  Matrix unlabelled_x;
  std::vector<ClassId> unlabelled_y;
  std::vector<ClassId> old_classes;  // Y^l, sorted
  std::vector<ClassId> all_classes;  // Y^u, sorted

  std::size_t num_labelled() const { return labelled_y.size(); }
  std::size_t num_unlabelled() const { return unlabelled_y.size(); }
  bool is_old(ClassId c) const;
  // Index of c within old_classes; throws ContractViolation when c is new.
  std::size_t old_index(ClassId c) const;
  // Checks every structural invariant; throws ValidationError.
  void validate() const;

  friend bool operator==(const GcdDataset&, const GcdDataset&) = default;
};

/// The first ⌈old_fraction·classes⌉ class ids become old; a seeded
/// labelled_fraction of each old class is labelled, everything else is
/// unlabelled.
GcdDataset split_gcd(const LabelledPoints& points, double old_fraction,
                     double labelled_fraction, std::uint64_t seed);

struct AugmentParams {
  double noise_sd = 0.1;  // RMS norm of the additive noise vector
  double dropout_p = 0.1;
};

struct ViewPair {
  std::vector<double> view1;
  std::vector<double> view2;
  std::size_t source_index = 0;
};

struct ViewSeed {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t index = 0;
};

/// Two independently perturbed, L2-normalized views of x.
ViewPair augment(std::span<const double> x, const AugmentParams& params, ViewSeed seed);

// Single view, used by augment for each of its two sub-streams.
std::vector<double> augment_view(std::span<const double> x, const AugmentParams& params,
                                 std::uint64_t stream_seed);

void write_dataset(std::ostream& out, const GcdDataset& ds);
GcdDataset read_dataset(std::istream& in);
void save_dataset(const GcdDataset& ds, const std::filesystem::path& path);
GcdDataset load_dataset(const std::filesystem::path& path);

}  // namespace pnp
