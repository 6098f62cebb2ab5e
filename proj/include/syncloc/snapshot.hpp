#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "syncloc/isa.hpp"

namespace syncloc {

using Digest = std::array<std::uint8_t, 32>;

std::string digest_hex(const Digest& d);
Digest sha256(const void* data, std::size_t size);

// Tree-structured capture of all machine state at a synchronization point,
// mirroring the machine organization: root -> { shared_mem, core<k> ->
// { priv_mem, reg_file } }. Leaves are word arrays; every node carries a
// content hash over its payload, so value-equal snapshots hash equal and
// equal subtrees can be skipped while diffing.
struct SnapshotNode {
  std::string name;
  std::vector<SnapshotNode> children;  // empty for leaves
  std::vector<Word> words;             // leaf payload
  Digest hash{};

  bool is_leaf() const { return children.empty(); }

  // Bytes that the node's hash commits to; also the stored object payload.
  std::vector<std::uint8_t> payload() const;
  void rehash();  // recomputes hashes bottom-up
};

struct Snapshot {
  SnapshotNode root;

  static Snapshot from_state(const MachineState& state);

  // Registers, memories and shape only; pcs and barrier flags are not part
  // of a snapshot and come back defaulted.
  MachineState to_state() const;

  const Digest& root_hash() const { return root.hash; }
  bool shape_compatible(const Snapshot& other) const;
  MachineShape shape() const;

  friend bool operator==(const Snapshot& a, const Snapshot& b) {
    return a.root.hash == b.root.hash;
  }
};

// State capture at a barrier: every core parked at the barrier or halted
// (mid-flight cores of other regions are captured as they stand). Throws
// NotAtBarrier if no core is waiting and the machine is still running.
Snapshot snapshot_at_barrier(const MachineState& state);

// One maximal run of adjacent differing words within a single leaf.
struct DiffEntry {
  Location begin;
  int length = 0;
  std::vector<Word> machine_values;  // from the first argument
  std::vector<Word> model_values;    // from the second argument

  std::vector<Location> locations() const;
  std::string to_string() const;
};

struct DiffReport {
  std::vector<DiffEntry> entries;

  bool empty() const { return entries.empty(); }
  std::string to_text() const;
};

// Hash-pruned tree walk; entries in ascending (leaf, index) order. Empty iff
// the root hashes are equal. Throws ShapeMismatch on incompatible shapes.
DiffReport diff_snapshots(const Snapshot& machine, const Snapshot& model);

}  // namespace syncloc
