#pragma once

// Small datasets and a helper that brings a fresh state to the point where a
// single optimizer step can be taken, mirroring the start of train_epoch.

#include <vector>

#include "pnp/datagen.hpp"
#include "pnp/fastcluster.hpp"
#include "pnp/prototypes.hpp"
#include "pnp/random.hpp"
#include "pnp/trainer.hpp"

namespace fixture {

inline pnp::GcdDataset mixture_dataset(std::size_t classes, std::size_t dim, std::size_t per_class,
                                       std::uint64_t seed, double sep = 6.0) {
  pnp::MixtureParams mp;
  mp.num_classes = classes;
  mp.dim = dim;
  mp.per_class = per_class;
  mp.class_sep = sep;
  mp.seed = seed;
  return pnp::split_gcd(pnp::generate_mixture(mp), 0.5, 0.5, seed);
}

// Clusters the unlabelled features and installs buffers for `epoch`.
inline void prepare_buffers(pnp::ProberState& s, const pnp::GcdDataset& ds,
                            const pnp::TrainConfig& cfg, std::size_t epoch) {
  const pnp::Matrix f = pnp::encode(s.encoder, ds.unlabelled_x);
  const auto clusters = pnp::estimate_k(f, pnp::clustering_options(cfg, cfg.seed));
  s.bank.cluster_protos = pnp::cluster_prototypes(f, clusters);
  auto [student, teacher] = cfg.use_potential_prototypes
                                ? pnp::init_buffers(s.bank, epoch)
                                : pnp::init_cluster_only_buffers(s.bank, epoch);
  s.buffer = std::move(student);
  s.teacher_buffer = std::move(teacher);
}

// Every trainable parameter matrix of the student side, by tape id.
inline std::vector<std::pair<std::string, pnp::Matrix*>> student_parameters(pnp::ProberState& s) {
  std::vector<std::pair<std::string, pnp::Matrix*>> out;
  for (std::size_t i = 0; i < s.encoder.layers().size(); ++i) {
    out.emplace_back(pnp::weight_id(pnp::kEncoderPrefix, i), &s.encoder.layers()[i].weight);
    out.emplace_back(pnp::bias_id(pnp::kEncoderPrefix, i), &s.encoder.layers()[i].bias);
  }
  for (std::size_t i = 0; i < s.head.layers().size(); ++i) {
    out.emplace_back(pnp::weight_id(pnp::kHeadPrefix, i), &s.head.layers()[i].weight);
    out.emplace_back(pnp::bias_id(pnp::kHeadPrefix, i), &s.head.layers()[i].bias);
  }
  out.emplace_back(pnp::kBufferId, &s.buffer.slots);
  out.emplace_back(pnp::kLabelledProtosId, &s.bank.labelled_protos);
  return out;
}

// Teacher-side matrices, which must never receive an adjoint.
inline std::vector<const pnp::Matrix*> teacher_parameters(const pnp::ProberState& s) {
  std::vector<const pnp::Matrix*> out;
  for (const auto& l : s.teacher_encoder.layers()) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&s.teacher_buffer.slots);
  return out;
}

}  // namespace fixture
