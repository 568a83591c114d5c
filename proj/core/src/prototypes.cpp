#include "pnp/prototypes.hpp"

#include <algorithm>
#include <string>

#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {

std::size_t buffer_size_for(std::size_t num_old_classes, std::size_t multiplier) {
  if (multiplier == 0) throw ConfigError("buffer multiplier must be positive");
  return multiplier * num_old_classes;
}

Matrix cluster_prototypes(const Matrix& features, const ClusterResult& clusters) {
  if (clusters.assignment.size() != features.rows())
    throw ContractViolation("cluster_prototypes: assignment does not cover every feature row");
  Matrix protos(clusters.num_clusters, features.cols());
  std::vector<std::size_t> counts(clusters.num_clusters, 0);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const std::size_t c = clusters.assignment[i];
    if (c >= clusters.num_clusters)
      throw ContractViolation("cluster_prototypes: cluster id out of range");
    const double n = norm2(features.row(i));
    if (n < kNormalizeEps)
      throw DegenerateInputError("cluster_prototypes: zero-norm feature row");
    auto dst = protos.row(c);
    auto src = features.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j] / n;
    ++counts[c];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0)
      throw ContractViolation("cluster_prototypes: cluster " + std::to_string(c) + " is empty");
    for (double& v : protos.row(c)) v /= static_cast<double>(counts[c]);
  }
  return protos;
}

Matrix init_potential_pool(std::size_t dim, std::size_t rows, std::uint64_t seed) {
  if (dim == 0) throw ParameterError("init_potential_pool: dim must be >= 1");
  Rng rng = make_rng({seed, 0x706f6f6cULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix pool(rows, dim);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = pool.row(r);
    double n = 0.0;
    do {
      for (double& v : row) v = normal(rng);
      n = norm2(row);
    } while (n < 1e-9);
    for (double& v : row) v /= n;
  }
  return pool;
}

std::pair<MemoryBuffer, MemoryBuffer> init_buffers(const PrototypeBank& bank, std::size_t epoch) {
  const std::size_t ke = bank.cluster_protos.rows();
  const std::size_t kt = bank.buffer_size;
  if (ke >= kt)
    throw ConfigError("estimated cluster count " + std::to_string(ke) +
                      " reaches the memory buffer size " + std::to_string(kt) +
                      "; increase the buffer multiplier");
  if (bank.potential_pool.rows() < kt - ke)
    throw ConfigError("potential pool has fewer rows than free buffer slots");
  if (bank.potential_pool.cols() != bank.cluster_protos.cols())
    throw DimensionError("init_buffers: pool and cluster prototypes differ in width");

  MemoryBuffer student;
  student.slots = vstack(bank.cluster_protos, bank.potential_pool.slice_rows(0, kt - ke));
  student.cluster_slots = ke;
  student.epoch = epoch;
  student.role = BufferRole::kStudent;
  MemoryBuffer teacher = student;
  teacher.role = BufferRole::kTeacher;
  return {std::move(student), std::move(teacher)};
}

std::pair<MemoryBuffer, MemoryBuffer> init_cluster_only_buffers(const PrototypeBank& bank,
                                                                std::size_t epoch) {
  MemoryBuffer student;
  student.slots = bank.cluster_protos;
  student.cluster_slots = bank.cluster_protos.rows();
  student.epoch = epoch;
  student.role = BufferRole::kStudent;
  MemoryBuffer teacher = student;
  teacher.role = BufferRole::kTeacher;
  return {std::move(student), std::move(teacher)};
}

void write_back_potential(const MemoryBuffer& student, PrototypeBank& bank) {
  const std::size_t n = student.potential_slots();
  if (n > bank.potential_pool.rows())
    throw DimensionError("write_back_potential: more potential slots than pool rows");
  for (std::size_t r = 0; r < n; ++r) {
    auto src = student.slots.row(student.cluster_slots + r);
    std::copy(src.begin(), src.end(), bank.potential_pool.row(r).begin());
  }
}

}  // namespace pnp
