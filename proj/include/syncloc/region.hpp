#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "syncloc/program.hpp"

namespace syncloc {

// Sentinel barrier ids for the pre-execution and all-halted states, which
// count as synchronization points.
inline constexpr int kInitialBarrier = -1;
inline constexpr int kFinalBarrier = -2;

std::string barrier_name(int barrier_id);

struct RegionId {
  int core = 0;
  int ordinal = 0;

  friend bool operator==(const RegionId&, const RegionId&) = default;
  friend auto operator<=>(const RegionId&, const RegionId&) = default;
  std::string to_string() const;
};

// A maximal per-core instruction interval between two adjacent
// synchronization points. pc_range covers the payload instructions only;
// the opening/closing SYNC (and the final HALT) sit on the boundaries.
struct SyncRegion {
  RegionId id;
  int pc_begin = 0;
  int pc_end = 0;  // half-open
  int upper_barrier = kInitialBarrier;  // barrier opening the region
  int lower_barrier = kFinalBarrier;    // barrier closing the region

  bool empty() const { return pc_begin == pc_end; }
  int length() const { return pc_end - pc_begin; }
  std::string to_string() const;
};

// Single linear scan per core. The optional counter reports elementary steps
// for complexity instrumentation.
std::vector<SyncRegion> divide_into_regions(const Program& prog,
                                            std::size_t* step_counter = nullptr);

// Directed dependency graph over synchronization regions with materialized
// parallel sets (regions that neither reach one another).
class RegionGraph {
 public:
  const std::vector<SyncRegion>& regions() const { return regions_; }
  const SyncRegion& region(const RegionId& id) const;
  bool contains(const RegionId& id) const;

  // Region holding this (core, pc); SYNC pcs map to the region they close,
  // the trailing HALT to the core's last region.
  RegionId region_of(int core, int pc) const;

  bool reaches(const RegionId& from, const RegionId& to) const;
  bool parallel(const RegionId& a, const RegionId& b) const;
  std::vector<RegionId> parallel_regions(const RegionId& r) const;

  const std::vector<std::pair<RegionId, RegionId>>& edges() const { return edges_; }
  std::size_t build_step_count() const { return build_steps_; }

  friend RegionGraph build_region_graph(const std::vector<SyncRegion>& regions,
                                        std::size_t* step_counter);

 private:
  int index_of(const RegionId& id) const;

  std::vector<SyncRegion> regions_;
  std::vector<std::pair<RegionId, RegionId>> edges_;
  // reach_[i] is a bitset over region indices: regions reachable from i
  // (excluding i itself). parallel_ is its symmetric complement.
  std::vector<std::vector<std::uint64_t>> reach_;
  std::vector<std::vector<int>> parallel_;
  std::vector<std::vector<int>> core_region_index_;  // per core: flat index by ordinal
  std::size_t build_steps_ = 0;
};

RegionGraph build_region_graph(const std::vector<SyncRegion>& regions,
                               std::size_t* step_counter = nullptr);

// Convenience: divide and build in one go.
RegionGraph analyze_regions(const Program& prog);

// Splits every region longer than max_region_length by inserting SYNCs with
// fresh barrier ids. Fresh ids are single-core, so no cross-core ordering is
// added and the existing barrier order stays consistent.
Program insert_sync_points(const Program& prog, int max_region_length);

// Graphviz dot rendering of nodes and edges, for the dump-graph subcommand.
std::string region_graph_to_dot(const RegionGraph& graph);

}  // namespace syncloc
