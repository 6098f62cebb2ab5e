#include "syncloc/localizer.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace syncloc {

const char* verdict_kind_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::Clean: return "CLEAN";
    case VerdictKind::DataRace: return "DATA_RACE";
    case VerdictKind::ErrorTriggered: return "ERROR_TRIGGERED";
    case VerdictKind::BenignDivergence: return "BENIGN_DIVERGENCE";
  }
  return "?";
}

namespace {

std::optional<TraceWriter> last_writer_of(const ExecTrace& trace, const Location& loc) {
  for (auto it = trace.records.rbegin(); it != trace.records.rend(); ++it) {
    const RetireRecord& rec = *it;
    for (const auto& [wloc, value] : rec.writes)
      if (wloc == loc) return TraceWriter{trace.instr_of(rec), rec.step};
    if (rec.fault_applied && rec.op == Opcode::ST && rec.writes.empty()) {
      const Instruction& instr = trace.instr_of(rec);
      if (*instr.dest == loc) return TraceWriter{instr, rec.step};
    }
  }
  return std::nullopt;
}

bool tree_inside_region(const DepTreeNode& node, const RegionId& region,
                        const RegionGraph& graph) {
  for (const TraceWriter& w : node.writers)
    if (graph.region_of(w.instr.core, w.instr.pc) != region) return false;
  for (const DepTreeNode& child : node.children)
    if (!tree_inside_region(child, region, graph)) return false;
  return true;
}

std::string describe(const Instruction& instr) {
  std::ostringstream os;
  os << "c" << instr.core << "#" << instr.pc << " '" << instr.to_string() << "'";
  return os.str();
}

}  // namespace

Localizer::Localizer(Program prog, const FaultSpec& fault, const SchedulerConfig& sched,
                     SnapshotStore& store)
    : prog_(std::make_shared<Program>(std::move(prog))), fault_(fault), sched_(sched),
      store_(store) {
  prog_->validate();
  graph_ = analyze_regions(*prog_);
}

int Localizer::sync_point_count() const {
  return static_cast<int>(prog_->barrier_order().size()) + 2;
}

std::vector<StoreRef> Localizer::pregenerate_model_snapshots() {
  RunResult run = run_reference(prog_);
  std::vector<StoreRef> refs;
  refs.reserve(run.snapshots.size());
  for (const auto& [point, snap] : run.snapshots)
    refs.push_back(store_.commit(Branch::Model, point.key(), snap));
  model_trace_ = std::move(run.trace);
  model_ready_ = true;
  return refs;
}

Snapshot Localizer::model_snapshot_at(const std::string& barrier_key) const {
  auto ref = store_.latest(Branch::Model, barrier_key);
  if (!ref)
    fail(ErrorCode::MissingModelSnapshot, "no model snapshot for " + barrier_key);
  return store_.checkout(*ref);
}

ResumeSpec Localizer::resume_spec_for(const SyncRegion& region, const StoreRef& ref) const {
  ResumeSpec spec;
  spec.snapshot = store_.checkout(ref);
  spec.at = region.upper_barrier == kInitialBarrier
                ? BarrierPoint::initial()
                : BarrierPoint::barrier(region.upper_barrier);
  spec.start_pcs.assign(static_cast<std::size_t>(prog_->core_count()), std::nullopt);
  for (const SyncRegion& r : graph_.regions()) {
    if (r.upper_barrier == region.upper_barrier)
      spec.start_pcs[static_cast<std::size_t>(r.id.core)] = r.pc_begin;
  }
  return spec;
}

// Scoreboard loop for step 3: commit the machine snapshot at every
// synchronization point, diff it against the model snapshot, and decide
// whether to continue, stop with a race, or escalate to step 4.
class Step3Observer : public RunObserver {
 public:
  explicit Step3Observer(Localizer& owner) : owner_(owner) {}

  Action on_barrier(const BarrierPoint& point, const MachineState& state,
                    const ExecTrace& trace) override {
    Snapshot machine_snap = Snapshot::from_state(state);
    owner_.store_.commit(Branch::Machine, point.key(), machine_snap);
    Snapshot model_snap = owner_.model_snapshot_at(point.key());
    DiffReport diff = diff_snapshots(machine_snap, model_snap);

    std::vector<Location> words;
    for (const DiffEntry& entry : diff.entries)
      for (const Location& loc : entry.locations())
        if (!benign_.count(loc)) words.push_back(loc);

    if (words.empty()) {
      note("[step3] " + point.key() + ": snapshots match" +
           (diff.empty() ? "" : " outside benign-flagged locations"));
      return Action::Continue;
    }
    note("[step3] " + point.key() + ": " + std::to_string(diff.entries.size()) +
         " differing interval(s), " + std::to_string(words.size()) + " location(s)");
    return handle_mismatch(point, words, trace);
  }

  Action on_retire(const RetireRecord& rec, const Instruction& instr,
                   const ExecTrace& trace) override {
    if (!(rec.fault_applied && rec.corrupted && instr.check_class == CheckClass::Immediate))
      return Action::Continue;
    // The scoreboard catches an immediately checked instruction with a wrong
    // result: this instruction is the error-reported one.
    note("[step3] immediate check failed at " + describe(instr));
    RegionId current = owner_.graph_.region_of(instr.core, instr.pc);
    DepTreeNode tree = build_tree_from_instruction(instr, trace, owner_.graph_, current);
    note_tree(tree);
    auto races = detect_races(tree, owner_.graph_);
    if (!races.empty()) {
      race_ = races.front();
      note("[step3] data race: " + race_->to_string());
      return Action::Stop;
    }
    if (tree.writers.empty())
      fail(ErrorCode::Internal, "error-reported instruction has no in-scope writer");
    escalate(current, {std::move(tree)});
    return Action::Stop;
  }

  std::set<Location> benign_;
  std::optional<RaceFinding> race_;
  std::optional<Escalation> escalation_;
  std::vector<std::string> narrative_;

 private:
  void note(std::string line) { narrative_.push_back(std::move(line)); }

  void note_tree(const DepTreeNode& tree) {
    std::istringstream in(tree_to_text(tree));
    std::string line;
    while (std::getline(in, line)) note("[step3]   " + line);
  }

  // Current region for a differing location: the region of its most recent
  // writer when that region ends at this point, otherwise any region ending
  // here (the writer then sits in a parallel, still-running region).
  RegionId choose_current(const BarrierPoint& point, const TraceWriter& last) const {
    RegionId rw = owner_.graph_.region_of(last.instr.core, last.instr.pc);
    if (owner_.graph_.region(rw).lower_barrier == point.boundary_id()) return rw;
    return anchor_region(point);
  }

  RegionId anchor_region(const BarrierPoint& point) const {
    int boundary = point.boundary_id();
    for (const SyncRegion& r : owner_.graph_.regions())
      if (r.lower_barrier == boundary) return r.id;
    fail(ErrorCode::Internal, "no region ends at " + point.key());
  }

  // Builds the dependency tree for a differing location, preferring the
  // machine trace and falling back to the model trace when the machine never
  // wrote the location in scope (dropped stores, skipped paths).
  struct BuiltTree {
    DepTreeNode tree;
    RegionId current;
  };
  std::optional<BuiltTree> build_for(const Location& loc, const BarrierPoint& point,
                                     const ExecTrace& machine_trace,
                                     const ExecTrace& model_trace) {
    for (const ExecTrace* trace : {&machine_trace, &model_trace}) {
      auto last = last_writer_of(*trace, loc);
      if (!last) continue;
      RegionId current = choose_current(point, *last);
      DepTreeNode tree = build_tree(loc, *trace, owner_.graph_, current);
      if (!tree.writers.empty()) return BuiltTree{std::move(tree), current};
    }
    return std::nullopt;
  }

  Action handle_mismatch(const BarrierPoint& point, const std::vector<Location>& words,
                         const ExecTrace& trace) {
    const ExecTrace model_cut = owner_.truncated_model_trace(point);
    std::vector<BuiltTree> escalating;
    std::vector<Location> benign_here;
    for (const Location& loc : words) {
      auto built = build_for(loc, point, trace, model_cut);
      if (!built)
        fail(ErrorCode::Internal,
             "mismatch at " + loc.to_string() + " has no in-scope writer in either trace");
      note("[step3] dependency tree at " + loc.to_string() + ":");
      note_tree(built->tree);
      auto races = detect_races(built->tree, owner_.graph_);
      if (!races.empty()) {
        race_ = races.front();
        note("[step3] data race: " + race_->to_string());
        return Action::Stop;
      }
      if (all_writers_parallel(built->tree, built->current, owner_.graph_)) {
        benign_here.push_back(loc);
      } else {
        escalating.push_back(std::move(*built));
      }
    }
    if (escalating.empty()) {
      for (const Location& loc : benign_here) benign_.insert(loc);
      note("[step3] " + point.key() + ": all differing values come from parallel regions; "
           "benign scheduling divergence, continuing");
      return Action::Continue;
    }
    for (const Location& loc : benign_here) benign_.insert(loc);
    std::vector<DepTreeNode> trees;
    trees.reserve(escalating.size());
    RegionId current = escalating.front().current;
    for (BuiltTree& bt : escalating) trees.push_back(std::move(bt.tree));
    escalate(current, std::move(trees));
    return Action::Stop;
  }

  void escalate(const RegionId& current, std::vector<DepTreeNode> trees) {
    const SyncRegion& region = owner_.graph_.region(current);
    std::string key = barrier_name(region.upper_barrier);
    auto ref = owner_.store_.latest(Branch::Machine, key);
    if (!ref)
      fail(ErrorCode::Internal, "no machine snapshot at region-opening barrier " + key);
    note("[step3] escalating to step 4: current region " + region.to_string() +
         ", resume from " + ref->to_string());
    Escalation esc;
    esc.trees = std::move(trees);
    esc.current = current;
    esc.resume_ref = *ref;
    escalation_ = std::move(esc);
  }

  Localizer& owner_;
};

ExecTrace Localizer::truncated_model_trace(const BarrierPoint& point) const {
  if (!model_trace_)
    fail(ErrorCode::MissingModelSnapshot, "model snapshots were not pregenerated");
  const ExecTrace& full = *model_trace_;
  ExecTrace cut;
  cut.program = full.program;
  if (point.kind == BarrierPoint::Kind::Final) {
    cut.records = full.records;
    return cut;
  }
  std::uint64_t upto = 0;
  bool found = false;
  for (const ReleaseRecord& rel : full.releases) {
    if (rel.point == point) {
      upto = rel.after_step;
      found = true;
      break;
    }
  }
  if (!found && point.kind == BarrierPoint::Kind::Initial) return cut;
  if (!found) fail(ErrorCode::Internal, "model trace never released " + point.key());
  cut.records.assign(full.records.begin(),
                     full.records.begin() + static_cast<std::ptrdiff_t>(upto));
  return cut;
}

std::variant<Verdict, Escalation> Localizer::run_step3() {
  Step3Observer observer(*this);
  RunResult run = run_dut(prog_, fault_, sched_, std::nullopt, std::nullopt, &observer);
  std::uint64_t executed = run.trace.records.size();

  if (observer.race_) {
    Verdict v;
    v.kind = VerdictKind::DataRace;
    v.race = observer.race_;
    v.executed_instructions = executed;
    v.benign_locations.assign(observer.benign_.begin(), observer.benign_.end());
    v.narrative = std::move(observer.narrative_);
    return v;
  }
  if (observer.escalation_) {
    Escalation esc = std::move(*observer.escalation_);
    esc.executed_instructions = executed;
    esc.benign_locations.assign(observer.benign_.begin(), observer.benign_.end());
    esc.narrative = std::move(observer.narrative_);
    return esc;
  }
  Verdict v;
  v.kind = observer.benign_.empty() ? VerdictKind::Clean : VerdictKind::BenignDivergence;
  v.executed_instructions = executed;
  v.benign_locations.assign(observer.benign_.begin(), observer.benign_.end());
  v.narrative = std::move(observer.narrative_);
  v.narrative.push_back(std::string("[step3] final point passed: ") +
                        (v.kind == VerdictKind::Clean ? "clean run" : "benign divergence only"));
  return v;
}

namespace {

// True when the first machine/model divergence in the replayed traces
// directly follows a BEQZ on that core.
bool control_flow_suspect(const Program& prog, const ExecTrace& dut, const ExecTrace& ref) {
  for (int c = 0; c < prog.core_count(); ++c) {
    std::vector<int> a, b;
    for (const RetireRecord& rec : dut.records)
      if (rec.core == c) a.push_back(rec.pc);
    for (const RetireRecord& rec : ref.records)
      if (rec.core == c) b.push_back(rec.pc);
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] == b[i]) continue;
      if (i > 0 && prog.at(c, a[i - 1]).op == Opcode::BEQZ) return true;
      break;
    }
  }
  return false;
}

}  // namespace

Verdict Localizer::bisect_region(const Escalation& escalation) {
  const SyncRegion& region = graph_.region(escalation.current);
  Verdict verdict;
  verdict.kind = VerdictKind::ErrorTriggered;
  verdict.region = escalation.current;
  verdict.executed_instructions = escalation.executed_instructions;
  verdict.benign_locations = escalation.benign_locations;
  verdict.narrative = escalation.narrative;
  auto note = [&](std::string line) { verdict.narrative.push_back(std::move(line)); };

  // Race freedom guarantees one tree lies entirely inside the current region.
  const DepTreeNode* tree = nullptr;
  for (const DepTreeNode& t : escalation.trees) {
    if (!t.writers.empty() && tree_inside_region(t, escalation.current, graph_)) {
      tree = &t;
      break;
    }
  }
  if (!tree)
    fail(ErrorCode::NoCurrentRegionTree,
         "no escalated tree lies entirely inside " + escalation.current.to_string());

  ResumeSpec spec = resume_spec_for(region, escalation.resume_ref);
  note("[step4] bisecting " + region.to_string() + " from " +
       escalation.resume_ref.to_string());

  struct NodeCheck {
    const DepTreeNode* node;
    int depth;
    bool failed = false;
    std::vector<const TraceWriter*> failing;
    bool control_suspect = false;
  };
  std::vector<NodeCheck> checks;
  checks.push_back({tree, 0});

  for (std::size_t at = 0; at < checks.size(); ++at) {
    // Copy out before candidate runs: enqueuing children reallocates checks.
    const DepTreeNode* node = checks[at].node;
    int depth = checks[at].depth;
    NodeCheck check{node, depth};
    std::vector<const TraceWriter*> candidates;
    for (const TraceWriter& w : node->writers) candidates.push_back(&w);
    std::sort(candidates.begin(), candidates.end(),
              [](const TraceWriter* a, const TraceWriter* b) {
                return ref_of(a->instr) < ref_of(b->instr);
              });
    for (const TraceWriter* w : candidates) {
      InstrRef finish = ref_of(w->instr);
      RunResult dut = run_dut(prog_, fault_, sched_, spec, finish);
      RunResult ref = run_reference(prog_, spec, finish);
      verdict.executed_instructions += dut.trace.records.size();
      const Location dest = *w->instr.dest;
      Word machine_value = dut.final_state.read(dest);
      Word model_value = ref.final_state.read(dest);
      if (machine_value != model_value) {
        check.failed = true;
        check.failing.push_back(w);
        if (check.failing.size() == 1)
          check.control_suspect = control_flow_suspect(*prog_, dut.trace, ref.trace);
        note("[step4] " + describe(w->instr) + " rechecks wrong: " + dest.to_string() +
             " machine=" + std::to_string(machine_value) +
             " model=" + std::to_string(model_value));
      } else {
        note("[step4] " + describe(w->instr) + " rechecks correct");
      }
    }
    checks[at] = check;
    if (check.failed) {
      for (const DepTreeNode& child : node->children) checks.push_back({&child, depth + 1});
    } else if (!node->writers.empty()) {
      note("[step4] all writers of " + node->location.to_string() +
           " check correct: subtree pruned");
    }
  }

  if (!checks.front().failed)
    fail(ErrorCode::Internal,
         "step 3 escalated but every root writer rechecks correct");

  // Deepest failing node with no failing child; ties go to discovery order.
  std::set<const DepTreeNode*> failed_nodes;
  for (const NodeCheck& check : checks)
    if (check.failed) failed_nodes.insert(check.node);
  const NodeCheck* terminal = nullptr;
  for (const NodeCheck& check : checks) {
    if (!check.failed) continue;
    bool child_failed = false;
    for (const DepTreeNode& child : check.node->children)
      if (failed_nodes.count(&child)) child_failed = true;
    if (child_failed) continue;
    if (!terminal || check.depth > terminal->depth) terminal = &check;
  }
  // terminal is non-null: the root failed and the tree is finite.
  const TraceWriter* culprit = terminal->failing.front();
  for (const TraceWriter* w : terminal->failing)
    if (ref_of(w->instr) < ref_of(culprit->instr)) culprit = w;

  verdict.culprit = culprit->instr;
  verdict.control_suspect = terminal->control_suspect;
  note("[step4] error-triggered instruction: " + describe(*verdict.culprit) +
       (verdict.control_suspect ? " (control flow suspect)" : ""));
  return verdict;
}

Verdict Localizer::locate() {
  pregenerate_model_snapshots();
  auto outcome = run_step3();
  if (std::holds_alternative<Verdict>(outcome)) return std::get<Verdict>(std::move(outcome));
  return bisect_region(std::get<Escalation>(outcome));
}

Verdict locate(const Program& prog, const FaultSpec& fault, const SchedulerConfig& sched,
               SnapshotStore& store) {
  Localizer localizer(prog, fault, sched, store);
  return localizer.locate();
}

}  // namespace syncloc
