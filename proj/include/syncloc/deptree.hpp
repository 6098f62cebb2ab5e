#pragma once

#include <string>
#include <vector>

#include "syncloc/machine.hpp"
#include "syncloc/region.hpp"

namespace syncloc {

// One in-scope write of a location, as observed in a trace.
struct TraceWriter {
  Instruction instr;
  std::uint64_t step = 0;  // retirement index in the source trace
};

// Node of an instruction dependency tree: a location, every in-scope trace
// instruction that wrote it, and one child per distinct operand location of
// those writers. A node whose location was last written by a predecessor
// region is a stopped leaf: the snapshot at the predecessor's boundary was
// already checked.
struct DepTreeNode {
  Location location;
  std::vector<TraceWriter> writers;
  std::vector<DepTreeNode> children;
  bool stopped = false;
};

// Backward breadth-wise expansion over data dependencies, scoped to the
// current region and its parallel regions. A location already seen on the
// path from the root is not expanded again. Throws RootNotWritten when the
// root location was never written anywhere in the trace.
DepTreeNode build_tree(const Location& root, const ExecTrace& trace, const RegionGraph& graph,
                       const RegionId& current);

// Tree rooted at an error-reported instruction: at its dest location, or at
// its condition register for BEQZ (a branch reads but never writes).
DepTreeNode build_tree_from_instruction(const Instruction& reported, const ExecTrace& trace,
                                        const RegionGraph& graph, const RegionId& current);

enum class RaceKind { WAW, RAW, WAR };
const char* race_kind_name(RaceKind k);

// Two conflicting accesses from parallel regions. `first` retired before
// `second` in the observed trace.
struct RaceFinding {
  RaceKind kind = RaceKind::WAW;
  Instruction first;
  Instruction second;
  Location location;
  RegionId first_region;
  RegionId second_region;

  std::string to_string() const;
};

// WAW: two writers of one node from distinct parallel regions. RAW/WAR: a
// writer in a node and a reader among its parent's writers from distinct
// parallel regions, classified by observed order. Findings are deduplicated
// and sorted by (pc, core) of the first instruction.
std::vector<RaceFinding> detect_races(const DepTreeNode& tree, const RegionGraph& graph);

// True iff every root writer sits in a region parallel to `current`: the
// mismatch is benign scheduling divergence of still-running regions.
bool all_writers_parallel(const DepTreeNode& tree, const RegionId& current,
                          const RegionGraph& graph);

// Unique (core, pc) set over all nodes, ascending.
std::vector<InstrRef> tree_instructions(const DepTreeNode& tree);

std::string tree_to_text(const DepTreeNode& tree);

}  // namespace syncloc
