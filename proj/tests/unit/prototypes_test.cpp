#include <gtest/gtest.h>

#include "pnp/errors.hpp"
#include "pnp/prototypes.hpp"

using pnp::ClusterResult;
using pnp::Matrix;

TEST(ClusterPrototypes, SingletonIsItsMember) {
  const Matrix f{{0.6, 0.8}, {1.0, 0.0}};
  const Matrix p = pnp::cluster_prototypes(f, ClusterResult::from_labels({0, 1}));
  EXPECT_EQ(p, f);
}

TEST(ClusterPrototypes, AntipodalMembersAverageToZero) {
  const Matrix p = pnp::cluster_prototypes(Matrix{{1, 0}, {-1, 0}}, ClusterResult::from_labels({0, 0}));
  EXPECT_EQ(p, Matrix(1, 2));
}

TEST(ClusterPrototypes, MeanIsNotRenormalized) {
  const Matrix p = pnp::cluster_prototypes(Matrix{{1, 0}, {0, 1}}, ClusterResult::from_labels({0, 0}));
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
}

TEST(ClusterPrototypes, EmptyClusterThrows) {
  ClusterResult c;
  c.assignment = {0, 0};
  c.num_clusters = 2;
  EXPECT_THROW(pnp::cluster_prototypes(Matrix{{1, 0}, {0, 1}}, c), pnp::ContractViolation);
}

TEST(Buffers, SizeFollowsMultiplier) {
  EXPECT_EQ(pnp::buffer_size_for(5), 20u);
  EXPECT_EQ(pnp::buffer_size_for(5, 2), 10u);
  EXPECT_THROW(pnp::buffer_size_for(5, 0), pnp::ConfigError);
}

TEST(Buffers, ClusterAndPotentialSlots) {
  pnp::PrototypeBank bank;
  bank.buffer_size = pnp::buffer_size_for(5);
  bank.cluster_protos = Matrix(3, 4, 0.5);
  bank.potential_pool = pnp::init_potential_pool(4, bank.buffer_size, 1);
  auto [s, t] = pnp::init_buffers(bank, 7);
  EXPECT_EQ(s.size(), 20u);
  EXPECT_EQ(s.cluster_slots, 3u);
  EXPECT_EQ(s.potential_slots(), 17u);
  EXPECT_EQ(s.slots, t.slots);
  EXPECT_EQ(s.role, pnp::BufferRole::kStudent);
  EXPECT_EQ(t.role, pnp::BufferRole::kTeacher);
  EXPECT_EQ(s.epoch, 7u);
  EXPECT_EQ(s.slots.slice_rows(3, 20), bank.potential_pool.slice_rows(0, 17));
}

TEST(Buffers, FullBufferIsConfigError) {
  pnp::PrototypeBank bank;
  bank.buffer_size = 4;
  bank.cluster_protos = Matrix(4, 2, 0.1);
  bank.potential_pool = pnp::init_potential_pool(2, 4, 1);
  EXPECT_THROW(pnp::init_buffers(bank, 0), pnp::ConfigError);
  bank.cluster_protos = Matrix(5, 2, 0.1);
  EXPECT_THROW(pnp::init_buffers(bank, 0), pnp::ConfigError);
}

TEST(Buffers, ClusterOnly) {
  pnp::PrototypeBank bank;
  bank.cluster_protos = Matrix(3, 2, 0.1);
  auto [s, t] = pnp::init_cluster_only_buffers(bank, 0);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.potential_slots(), 0u);
}

TEST(Buffers, WriteBackCopiesPotentialSlots) {
  pnp::PrototypeBank bank;
  bank.buffer_size = 6;
  bank.cluster_protos = Matrix(2, 3, 0.2);
  bank.potential_pool = pnp::init_potential_pool(3, 6, 4);
  auto [s, t] = pnp::init_buffers(bank, 0);
  for (double& v : s.slots.values()) v += 1.0;
  const Matrix before = bank.potential_pool;
  pnp::write_back_potential(s, bank);
  EXPECT_EQ(bank.potential_pool.slice_rows(0, 4), s.slots.slice_rows(2, 6));
  EXPECT_EQ(bank.potential_pool.slice_rows(4, 6), before.slice_rows(4, 6));
}

TEST(PotentialPool, UnitRowsAndSeeded) {
  const Matrix a = pnp::init_potential_pool(5, 8, 3);
  EXPECT_TRUE(pnp::rows_unit_norm(a));
  EXPECT_EQ(a, pnp::init_potential_pool(5, 8, 3));
  EXPECT_NE(a, pnp::init_potential_pool(5, 8, 4));
}
