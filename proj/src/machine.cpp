#include "syncloc/machine.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "syncloc/region.hpp"

namespace syncloc {

const char* fault_kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::None: return "NONE";
    case FaultKind::WrongResult: return "WRONG_RESULT";
    case FaultKind::DroppedStore: return "DROPPED_STORE";
    case FaultKind::BranchFlip: return "BRANCH_FLIP";
  }
  return "?";
}

std::optional<FaultKind> fault_kind_from_name(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  for (FaultKind k : {FaultKind::None, FaultKind::WrongResult, FaultKind::DroppedStore,
                      FaultKind::BranchFlip}) {
    if (upper == fault_kind_name(k)) return k;
  }
  return std::nullopt;
}

int BarrierPoint::boundary_id() const {
  switch (kind) {
    case Kind::Initial: return kInitialBarrier;
    case Kind::Final: return kFinalBarrier;
    case Kind::Barrier: return id;
  }
  return kInitialBarrier;
}

std::string BarrierPoint::key() const {
  return barrier_name(boundary_id());
}

namespace {

// Pure form of the single-instruction semantics: what execute_one would
// write, without touching the state. The executor injects faults between
// evaluation and application.
StepResult evaluate_one(const MachineState& state, const Instruction& instr) {
  StepResult result;
  switch (instr.op) {
    case Opcode::LI:
      result.writes.emplace_back(*instr.dest, *instr.imm);
      break;
    case Opcode::ADD:
      result.writes.emplace_back(
          *instr.dest, static_cast<Word>(static_cast<std::uint64_t>(state.read(instr.srcs[0])) +
                                         static_cast<std::uint64_t>(state.read(instr.srcs[1]))));
      break;
    case Opcode::MUL:
      result.writes.emplace_back(
          *instr.dest, static_cast<Word>(static_cast<std::uint64_t>(state.read(instr.srcs[0])) *
                                         static_cast<std::uint64_t>(state.read(instr.srcs[1]))));
      break;
    case Opcode::XOR:
      result.writes.emplace_back(*instr.dest, state.read(instr.srcs[0]) ^ state.read(instr.srcs[1]));
      break;
    case Opcode::LD:
    case Opcode::ST:
      result.writes.emplace_back(*instr.dest, state.read(instr.srcs[0]));
      break;
    case Opcode::BEQZ:
      result.branch_taken = state.read(instr.srcs[0]) == 0;
      break;
    case Opcode::SYNC:
    case Opcode::HALT:
      break;
  }
  return result;
}

enum class Policy { SeededRoundRobin, Canonical };

class Executor {
 public:
  Executor(std::shared_ptr<const Program> prog, const FaultSpec& fault,
           const SchedulerConfig& sched, Policy policy, const std::optional<ResumeSpec>& from,
           const std::optional<InstrRef>& finish, RunObserver* observer)
      : prog_(*prog),
        fault_(fault),
        sched_(sched),
        policy_(policy),
        finish_(finish),
        observer_(observer),
        resumed_(from.has_value()),
        state_(prog->shape()),
        rng_(sched.seed) {
    // Resumed runs replay a program the full run already validated.
    if (!resumed_) prog_.validate();
    validate_fault();
    frozen_.assign(static_cast<std::size_t>(prog_.core_count()), false);
    for (const auto& seq : prog_.cores)
      for (const Instruction& instr : seq)
        if (instr.op == Opcode::SYNC) ++participant_count_[*instr.barrier_id];
    if (from) {
      if (from->snapshot.shape() != prog_.shape())
        fail(ErrorCode::ShapeMismatch, "resume snapshot does not match the program shape");
      if (static_cast<int>(from->start_pcs.size()) != prog_.core_count())
        fail(ErrorCode::Internal, "resume point must give one start pc per core");
      state_ = from->snapshot.to_state();
      for (int c = 0; c < prog_.core_count(); ++c) {
        const auto& start = from->start_pcs[static_cast<std::size_t>(c)];
        if (start) {
          state_.cores[static_cast<std::size_t>(c)].pc = *start;
        } else {
          frozen_[static_cast<std::size_t>(c)] = true;
        }
      }
    }
    result_.trace.program = std::move(prog);
  }

  RunResult run() {
    if (!resumed_) {
      take_snapshot(BarrierPoint::initial());
      if (stop_) return finalize();
    }
    if (policy_ == Policy::Canonical)
      run_canonical();
    else
      run_round_robin();
    return finalize();
  }

 private:
  void validate_fault() const {
    if (fault_.kind == FaultKind::None) return;
    if (fault_.core < 0 || fault_.core >= prog_.core_count())
      fail(ErrorCode::FaultTargetMismatch, "fault targets a missing core");
    const auto& seq = prog_.cores[static_cast<std::size_t>(fault_.core)];
    if (fault_.pc < 0 || fault_.pc >= static_cast<int>(seq.size()))
      fail(ErrorCode::FaultTargetMismatch, "fault targets a missing pc");
    const Instruction& target = seq[static_cast<std::size_t>(fault_.pc)];
    switch (fault_.kind) {
      case FaultKind::WrongResult:
        if (!target.dest)
          fail(ErrorCode::FaultTargetMismatch, "WRONG_RESULT needs a dest-bearing target");
        break;
      case FaultKind::DroppedStore:
        if (target.op != Opcode::ST)
          fail(ErrorCode::FaultTargetMismatch, "DROPPED_STORE targets a non-ST instruction");
        break;
      case FaultKind::BranchFlip:
        if (target.op != Opcode::BEQZ)
          fail(ErrorCode::FaultTargetMismatch, "BRANCH_FLIP targets a non-BEQZ instruction");
        break;
      case FaultKind::None:
        break;
    }
  }

  bool runnable(int c) const {
    const CoreState& core = state_.cores[static_cast<std::size_t>(c)];
    return !core.halted && !core.waiting_barrier && !frozen_[static_cast<std::size_t>(c)];
  }

  bool any_runnable() const {
    for (int c = 0; c < prog_.core_count(); ++c)
      if (runnable(c)) return true;
    return false;
  }

  // Executes the instruction at the core's pc. Returns false when the core
  // parked at a SYNC instead of retiring.
  bool step(int c) {
    CoreState& core = state_.cores[static_cast<std::size_t>(c)];
    const Instruction& instr = prog_.at(c, core.pc);
    if (instr.op == Opcode::SYNC) {
      core.waiting_barrier = *instr.barrier_id;
      ++waiting_count_[*instr.barrier_id];
      return false;
    }

    StepResult res = evaluate_one(state_, instr);
    bool fault_here =
        fault_.kind != FaultKind::None && fault_.core == c && fault_.pc == core.pc;
    bool corrupted = false;
    if (fault_here) {
      switch (fault_.kind) {
        case FaultKind::WrongResult: {
          auto& [loc, value] = res.writes.front();
          Word clean = value;
          value = static_cast<Word>(static_cast<std::uint64_t>(value) +
                                    static_cast<std::uint64_t>(fault_.delta));
          corrupted = value != clean;
          break;
        }
        case FaultKind::DroppedStore: {
          corrupted = state_.read(res.writes.front().first) != res.writes.front().second;
          res.writes.clear();
          break;
        }
        case FaultKind::BranchFlip:
          res.branch_taken = !res.branch_taken;
          break;
        case FaultKind::None:
          break;
      }
    }

    RetireRecord rec;
    rec.step = static_cast<std::uint64_t>(result_.trace.records.size());
    rec.core = c;
    rec.pc = core.pc;
    rec.op = instr.op;
    rec.branch_taken = res.branch_taken;
    rec.fault_applied = fault_here;
    rec.corrupted = corrupted;
    rec.writes = res.writes;

    for (const auto& [loc, value] : res.writes) state_.write(loc, value);
    if (instr.op == Opcode::HALT)
      core.halted = true;
    else if (res.branch_taken)
      core.pc += *instr.branch_offset;
    else
      core.pc += 1;

    result_.trace.records.push_back(rec);
    if (observer_ &&
        observer_->on_retire(result_.trace.records.back(), instr, result_.trace) ==
            RunObserver::Action::Stop)
      stop_ = true;
    if (finish_ && finish_->core == c && finish_->pc == rec.pc) {
      result_.finish_retired = true;
      if (resumed_)
        frozen_[static_cast<std::size_t>(c)] = true;  // others run to their boundaries
      else
        stop_ = true;
    }
    return true;
  }

  void take_snapshot(const BarrierPoint& point) {
    Snapshot snap = Snapshot::from_state(state_);
    result_.snapshots.emplace_back(point, snap);
    if (observer_ && observer_->on_barrier(point, state_, result_.trace) == RunObserver::Action::Stop)
      stop_ = true;
  }

  // A barrier is releasable when every core containing it waits on it.
  std::optional<int> releasable_barrier() const {
    for (const auto& [id, count] : waiting_count_) {
      if (count == participant_count_.at(id)) return id;  // map order: smallest id first
    }
    return std::nullopt;
  }

  void release(int barrier_id) {
    ReleaseRecord rel;
    rel.point = BarrierPoint::barrier(barrier_id);
    rel.after_step = static_cast<std::uint64_t>(result_.trace.records.size());
    result_.trace.releases.push_back(rel);
    take_snapshot(rel.point);
    if (stop_) return;
    waiting_count_.erase(barrier_id);
    // Participants retire their SYNC in ascending core order.
    for (int c = 0; c < prog_.core_count(); ++c) {
      CoreState& core = state_.cores[static_cast<std::size_t>(c)];
      if (core.waiting_barrier && *core.waiting_barrier == barrier_id) {
        const Instruction& sync = prog_.at(c, core.pc);
        core.waiting_barrier.reset();
        RetireRecord rec;
        rec.step = static_cast<std::uint64_t>(result_.trace.records.size());
        rec.core = c;
        rec.pc = core.pc;
        rec.op = Opcode::SYNC;
        core.pc += 1;
        result_.trace.records.push_back(rec);
        if (observer_ && observer_->on_retire(result_.trace.records.back(), sync, result_.trace) ==
                             RunObserver::Action::Stop)
          stop_ = true;
      }
    }
  }

  // True when the run is over; releases barriers and takes snapshots as a
  // side effect. Shared by both policies.
  bool settle() {
    if (stop_) return true;
    if (!resumed_) {
      while (!any_runnable() && !state_.all_halted()) {
        auto barrier = releasable_barrier();
        if (!barrier) fail(ErrorCode::Deadlock, "a barrier never releases");
        release(*barrier);
        if (stop_) return true;
      }
      if (state_.all_halted()) {
        take_snapshot(BarrierPoint::final());
        return true;
      }
      return false;
    }
    return !any_runnable();
  }

  void run_canonical() {
    while (!settle()) {
      for (int c = 0; c < prog_.core_count(); ++c) {
        while (runnable(c)) {
          step(c);
          if (stop_) return;
        }
      }
    }
  }

  void run_round_robin() {
    int cursor = 0;
    while (!settle()) {
      int picked = -1;
      for (int i = 0; i < prog_.core_count(); ++i) {
        int c = (cursor + i) % prog_.core_count();
        if (runnable(c)) {
          picked = c;
          break;
        }
      }
      // settle() guaranteed a runnable core exists
      int quantum = 1 + static_cast<int>(rng_() % static_cast<std::uint64_t>(
                                                      std::max(1, sched_.quantum_max)));
      for (int i = 0; i < quantum && runnable(picked); ++i) {
        if (!step(picked)) break;  // parked
        if (stop_) return;
      }
      // Release as soon as participants arrive, before other cores move.
      if (!resumed_) {
        while (auto barrier = releasable_barrier()) {
          release(*barrier);
          if (stop_) return;
        }
      }
      cursor = (picked + 1) % prog_.core_count();
    }
  }

  RunResult finalize() {
    result_.final_state = state_;
    result_.stopped_by_observer = stop_;
    return std::move(result_);
  }

  const Program& prog_;
  FaultSpec fault_;
  SchedulerConfig sched_;
  Policy policy_;
  std::optional<InstrRef> finish_;
  RunObserver* observer_;
  bool resumed_;
  MachineState state_;
  std::mt19937_64 rng_;
  std::vector<bool> frozen_;
  std::map<int, int> participant_count_;  // barrier id -> cores containing it
  std::map<int, int> waiting_count_;      // barrier id -> cores parked on it
  RunResult result_;
  bool stop_ = false;
};

}  // namespace

RunResult run_dut(std::shared_ptr<const Program> prog, const FaultSpec& fault,
                  const SchedulerConfig& sched, const std::optional<ResumeSpec>& from,
                  const std::optional<InstrRef>& finish, RunObserver* observer) {
  Executor exec(std::move(prog), fault, sched, Policy::SeededRoundRobin, from, finish, observer);
  return exec.run();
}

RunResult run_reference(std::shared_ptr<const Program> prog, const std::optional<ResumeSpec>& from,
                        const std::optional<InstrRef>& finish, RunObserver* observer) {
  Executor exec(std::move(prog), FaultSpec{}, SchedulerConfig{}, Policy::Canonical, from, finish,
                observer);
  return exec.run();
}

RunResult run_dut(const Program& prog, const FaultSpec& fault, const SchedulerConfig& sched,
                  const std::optional<ResumeSpec>& from, const std::optional<InstrRef>& finish,
                  RunObserver* observer) {
  return run_dut(std::make_shared<Program>(prog), fault, sched, from, finish, observer);
}

RunResult run_reference(const Program& prog, const std::optional<ResumeSpec>& from,
                        const std::optional<InstrRef>& finish, RunObserver* observer) {
  return run_reference(std::make_shared<Program>(prog), from, finish, observer);
}

}  // namespace syncloc
