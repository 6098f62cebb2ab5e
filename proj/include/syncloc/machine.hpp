#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "syncloc/program.hpp"
#include "syncloc/snapshot.hpp"

namespace syncloc {

enum class FaultKind { None, WrongResult, DroppedStore, BranchFlip };

const char* fault_kind_name(FaultKind k);
std::optional<FaultKind> fault_kind_from_name(std::string_view name);

// The injected error-triggered instruction: fires exactly when (core, pc)
// retires. WrongResult adds delta to the written value, DroppedStore
// suppresses the store's write, BranchFlip inverts the branch decision.
struct FaultSpec {
  FaultKind kind = FaultKind::None;
  int core = 0;
  int pc = 0;
  Word delta = 0;
};

struct SchedulerConfig {
  std::uint64_t seed = 0;
  int quantum_max = 1;  // max consecutive steps per core before a reschedule
};

// A synchronization point: a barrier id, or the initial / final state.
struct BarrierPoint {
  enum class Kind { Initial, Barrier, Final };
  Kind kind = Kind::Initial;
  int id = -1;

  static BarrierPoint initial() { return {Kind::Initial, -1}; }
  static BarrierPoint final() { return {Kind::Final, -2}; }
  static BarrierPoint barrier(int id) { return {Kind::Barrier, id}; }

  // Matches the region boundary encoding (kInitialBarrier / kFinalBarrier).
  int boundary_id() const;
  std::string key() const;
  friend bool operator==(const BarrierPoint&, const BarrierPoint&) = default;
};

struct RetireRecord {
  std::uint64_t step = 0;  // global retirement index
  int core = 0;
  int pc = 0;
  Opcode op = Opcode::HALT;
  bool branch_taken = false;
  bool fault_applied = false;
  // True when the applied fault changed an architecturally visible value at
  // this retirement (what an immediate scoreboard check would flag).
  bool corrupted = false;
  std::vector<std::pair<Location, Word>> writes;
};

struct ReleaseRecord {
  BarrierPoint point;
  std::uint64_t after_step = 0;  // retirements completed before the release
};

struct ExecTrace {
  std::shared_ptr<const Program> program;
  std::vector<RetireRecord> records;
  std::vector<ReleaseRecord> releases;

  const Instruction& instr_of(const RetireRecord& rec) const {
    return program->at(rec.core, rec.pc);
  }
};

// Restart point for step-4 re-simulation: state from the snapshot, cores
// with a start pc resume there, the rest stay frozen. Barriers never release
// in a resumed run; resumed cores stop at their region's closing SYNC.
struct ResumeSpec {
  Snapshot snapshot;
  BarrierPoint at;
  std::vector<std::optional<int>> start_pcs;
};

struct RunResult {
  ExecTrace trace;
  MachineState final_state;
  std::vector<std::pair<BarrierPoint, Snapshot>> snapshots;
  bool stopped_by_observer = false;
  bool finish_retired = false;
};

// Hooks for barrier-to-barrier supervision (the step-3 scoreboard loop).
// The trace argument covers every retirement up to the event.
class RunObserver {
 public:
  enum class Action { Continue, Stop };
  virtual ~RunObserver() = default;
  // Called with participants parked, before the barrier releases.
  virtual Action on_barrier(const BarrierPoint&, const MachineState&, const ExecTrace&) {
    return Action::Continue;
  }
  virtual Action on_retire(const RetireRecord&, const Instruction&, const ExecTrace&) {
    return Action::Continue;
  }
};

// Fault-injecting executor: round-robin over ready cores, quantum drawn from
// the seeded generator, barriers released the moment their participants are
// all parked. Deterministic in (program, fault, seed).
RunResult run_dut(std::shared_ptr<const Program> prog, const FaultSpec& fault,
                  const SchedulerConfig& sched,
                  const std::optional<ResumeSpec>& from = std::nullopt,
                  const std::optional<InstrRef>& finish = std::nullopt,
                  RunObserver* observer = nullptr);

// Golden reference model: same semantics, no fault, canonical schedule (in
// each phase, ready cores run to their barrier in ascending core order).
RunResult run_reference(std::shared_ptr<const Program> prog,
                        const std::optional<ResumeSpec>& from = std::nullopt,
                        const std::optional<InstrRef>& finish = std::nullopt,
                        RunObserver* observer = nullptr);

// Convenience overloads copying the program into the resulting trace.
RunResult run_dut(const Program& prog, const FaultSpec& fault, const SchedulerConfig& sched,
                  const std::optional<ResumeSpec>& from = std::nullopt,
                  const std::optional<InstrRef>& finish = std::nullopt,
                  RunObserver* observer = nullptr);
RunResult run_reference(const Program& prog,
                        const std::optional<ResumeSpec>& from = std::nullopt,
                        const std::optional<InstrRef>& finish = std::nullopt,
                        RunObserver* observer = nullptr);

}  // namespace syncloc
