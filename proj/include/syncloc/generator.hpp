#pragma once

#include "syncloc/machine.hpp"
#include "syncloc/program.hpp"

namespace syncloc {

// Deterministic race-free program generation. Every core computes over its
// own registers and private memory; cross-core data flows only through
// shared slots each core owns and writes at most once, published in one
// phase and read in strictly later phases; full barriers close the phases.
struct GeneratorConfig {
  int cores = 2;
  int instrs_per_core = 100;       // per-core count including SYNCs and HALT
  int region_length_target = 50;
  std::uint64_t seed = 0;
};

Program generate_program(const GeneratorConfig& config);

// Dest-bearing instructions whose corruption is guaranteed to surface:
// immediately checked ones, and stores whose value survives to the region's
// closing barrier. Ascending (core, pc).
std::vector<InstrRef> observable_fault_targets(const Program& prog);

// Uniform choice over observable targets, WRONG_RESULT with nonzero delta.
// Throws NoObservableTarget when the program offers none.
FaultSpec place_fault(const Program& prog, std::uint64_t seed);

}  // namespace syncloc
