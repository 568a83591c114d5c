#pragma once

#include <filesystem>
#include <iosfwd>

#include "pnp/trainer.hpp"

namespace pnp {

// Text layout, one item per line:
//
//   pnp-checkpoint 1
//   epoch <n>
//   step <n>
//   matrix <name> <rows> <cols>
//   <cols values>          (repeated <rows> times)
//   ...
//   end
//
// Matrices: encoder.<i>.weight|bias, teacher_encoder.<i>.weight|bias,
// head.<i>.weight|bias, potential_pool, labelled_protos. Doubles use the
// shortest round-trip form, so a save/load cycle is exact.
//
// Buffers and momentum are not stored; they are rebuilt at the next epoch.

void write_checkpoint(std::ostream& out, const ProberState& state);
void save_checkpoint(const std::filesystem::path& path, const ProberState& state);

/// Restores parameters into a state. Throws ParseError on malformed input.
ProberState read_checkpoint(std::istream& in);
ProberState load_checkpoint(const std::filesystem::path& path);

}  // namespace pnp
