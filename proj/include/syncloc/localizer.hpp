#pragma once

#include <optional>
#include <variant>

#include "syncloc/deptree.hpp"
#include "syncloc/store.hpp"

namespace syncloc {

enum class VerdictKind { Clean, DataRace, ErrorTriggered, BenignDivergence };

const char* verdict_kind_name(VerdictKind k);

struct Verdict {
  VerdictKind kind = VerdictKind::Clean;
  std::optional<RaceFinding> race;        // DataRace
  std::optional<Instruction> culprit;     // ErrorTriggered: minimal under (pc, core)
  std::optional<RegionId> region;         // ErrorTriggered: region holding the culprit
  std::uint64_t executed_instructions = 0;
  // Set when the first machine/model divergence in the bisection replay
  // follows a BEQZ: the wrong value likely stems from wrong control flow.
  bool control_suspect = false;
  std::vector<Location> benign_locations;
  std::vector<std::string> narrative;
};

// Handoff from step 3 to step 4: the dependency trees built at the failing
// point, the synchronization region that must hold the error-triggered
// instruction, and the machine snapshot at the barrier opening that region
// (the paper's resume point).
struct Escalation {
  std::vector<DepTreeNode> trees;
  RegionId current;
  StoreRef resume_ref;
  std::uint64_t executed_instructions = 0;
  std::vector<Location> benign_locations;
  std::vector<std::string> narrative;
};

// Four-step pipeline: region division, region graph, barrier-to-barrier
// comparison against pregenerated model snapshots, and dependency-tree
// bisection by re-simulation.
class Localizer {
 public:
  Localizer(Program prog, const FaultSpec& fault, const SchedulerConfig& sched,
            SnapshotStore& store);

  // Runs the reference model once and commits one MODEL snapshot per
  // synchronization point (initial and final included), in release order.
  std::vector<StoreRef> pregenerate_model_snapshots();

  // DUT run with scoreboard comparison at every synchronization point.
  std::variant<Verdict, Escalation> run_step3();

  // Re-simulates tree candidates from the region-opening snapshot and
  // returns the minimal failing instruction.
  Verdict bisect_region(const Escalation& escalation);

  Verdict locate();

  const RegionGraph& graph() const { return graph_; }
  int sync_point_count() const;  // distinct barriers plus initial and final

 private:
  friend class Step3Observer;

  Snapshot model_snapshot_at(const std::string& barrier_key) const;
  ResumeSpec resume_spec_for(const SyncRegion& region, const StoreRef& ref) const;
  // Model trace cut at the reference's release of this point, so that tree
  // building never sees writes from regions beyond the compared boundary.
  ExecTrace truncated_model_trace(const BarrierPoint& point) const;

  std::shared_ptr<const Program> prog_;
  FaultSpec fault_;
  SchedulerConfig sched_;
  SnapshotStore& store_;
  RegionGraph graph_;
  std::optional<ExecTrace> model_trace_;
  bool model_ready_ = false;
};

Verdict locate(const Program& prog, const FaultSpec& fault, const SchedulerConfig& sched,
               SnapshotStore& store);

}  // namespace syncloc
