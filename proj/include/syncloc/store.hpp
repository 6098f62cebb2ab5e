#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "syncloc/snapshot.hpp"

namespace syncloc {

// Machine-state and model-state snapshots live on separate branches.
enum class Branch { Machine, Model };

const char* branch_name(Branch b);

// (branch, barrier_key, version) uniquely names a commit; versions per
// (branch, barrier_key) start at 1 and increase by 1.
struct StoreRef {
  Branch branch = Branch::Machine;
  std::string barrier_key;
  int version = 0;

  std::string to_string() const;
  friend bool operator==(const StoreRef&, const StoreRef&) = default;
};

// Content-addressed, versioned, append-only snapshot store.
//
// Layout under the root directory:
//   meta                      hash algorithm + configured shape
//   objects/<hex sha256>      node payloads, identical subtrees stored once
//   refs/<branch>/<key>       version log, one root hash per line
//
// Commits never overwrite: a new snapshot for the same synchronization point
// becomes the next version and all history stays reachable. Reads verify the
// stored payload against its name and raise CorruptObject on mismatch.
class SnapshotStore {
 public:
  SnapshotStore(std::filesystem::path root, const MachineShape& shape);

  StoreRef commit(Branch branch, const std::string& barrier_key, const Snapshot& snap);
  Snapshot checkout(const StoreRef& ref) const;

  std::optional<StoreRef> latest(Branch branch, const std::string& barrier_key) const;
  int version_count(Branch branch, const std::string& barrier_key) const;

  std::size_t object_count() const;
  std::size_t leaf_object_count() const;

  const std::filesystem::path& root() const { return root_; }
  const MachineShape& shape() const { return shape_; }

 private:
  std::filesystem::path object_path(const Digest& hash) const;
  std::filesystem::path ref_path(Branch branch, const std::string& barrier_key) const;
  void write_object(const SnapshotNode& node);
  SnapshotNode read_object(const Digest& hash, const std::string& name) const;

  std::filesystem::path root_;
  MachineShape shape_;
};

}  // namespace syncloc
