#pragma once

#include <cstdint>
#include <utility>

#include "pnp/fastcluster.hpp"
#include "pnp/numerics.hpp"

namespace pnp {

enum class BufferRole { kStudent, kTeacher };

/// Fixed-size prototype memory: the first `cluster_slots` rows come from the
/// current clustering, the rest are potential prototypes.
struct MemoryBuffer {
  Matrix slots;
  std::size_t cluster_slots = 0;
  std::size_t epoch = 0;
  BufferRole role = BufferRole::kStudent;

  std::size_t size() const { return slots.rows(); }
  std::size_t potential_slots() const { return slots.rows() - cluster_slots; }
};

struct PrototypeBank {
  Matrix cluster_protos;   // K^e × d, refreshed every epoch
  Matrix potential_pool;   // K^t × d, persistent learnable candidates
  Matrix labelled_protos;  // |Y^l| × d, learnable
  std::size_t buffer_size = 0;
};

inline constexpr std::size_t kDefaultBufferMultiplier = 4;

std::size_t buffer_size_for(std::size_t num_old_classes,
                            std::size_t multiplier = kDefaultBufferMultiplier);

/// Mean of the L2-normalized member features of each cluster. The means are
/// not re-normalized. Throws ContractViolation on an empty cluster id.
Matrix cluster_prototypes(const Matrix& features, const ClusterResult& clusters);

/// Standard-normal rows scaled to unit norm.
Matrix init_potential_pool(std::size_t dim, std::size_t rows, std::uint64_t seed);

/// Student and teacher buffers, both concat(μ^c, first K^t − K^e pool rows).
/// Throws ConfigError when K^e >= K^t.
std::pair<MemoryBuffer, MemoryBuffer> init_buffers(const PrototypeBank& bank, std::size_t epoch);

/// Buffers holding only the cluster prototypes (potential prototypes disabled).
std::pair<MemoryBuffer, MemoryBuffer> init_cluster_only_buffers(const PrototypeBank& bank,
                                                                std::size_t epoch);

/// Copies the trained potential slots of `student` back into the pool.
void write_back_potential(const MemoryBuffer& student, PrototypeBank& bank);

}  // namespace pnp
