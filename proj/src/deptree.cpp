#include "syncloc/deptree.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace syncloc {

const char* race_kind_name(RaceKind k) {
  switch (k) {
    case RaceKind::WAW: return "WAW";
    case RaceKind::RAW: return "RAW";
    case RaceKind::WAR: return "WAR";
  }
  return "?";
}

std::string RaceFinding::to_string() const {
  std::ostringstream os;
  os << race_kind_name(kind) << " on " << location.to_string() << ": c" << first.core << "#"
     << first.pc << " '" << first.to_string() << "' (" << first_region.to_string() << ") vs c"
     << second.core << "#" << second.pc << " '" << second.to_string() << "' ("
     << second_region.to_string() << ")";
  return os.str();
}

namespace {

using WriteIndex = std::unordered_map<Location, std::vector<TraceWriter>, LocationHash>;

WriteIndex index_writes(const ExecTrace& trace) {
  WriteIndex index;
  for (const RetireRecord& rec : trace.records) {
    for (const auto& [loc, value] : rec.writes)
      index[loc].push_back(TraceWriter{trace.instr_of(rec), rec.step});
    // A dropped store suppresses the write, but the instruction still counts
    // as a writer of its location so the tree can reach it.
    if (rec.fault_applied && rec.op == Opcode::ST && rec.writes.empty()) {
      const Instruction& instr = trace.instr_of(rec);
      index[*instr.dest].push_back(TraceWriter{instr, rec.step});
    }
  }
  return index;
}

struct TreeBuilder {
  const RegionGraph& graph;
  const RegionId current;
  WriteIndex writes;

  bool in_scope(const Instruction& instr) const {
    RegionId r = graph.region_of(instr.core, instr.pc);
    return r == current || graph.parallel(r, current);
  }

  // Expands one location given the set of locations on the path above it.
  DepTreeNode make_node(const Location& loc, std::vector<Location>& path) {
    DepTreeNode node;
    node.location = loc;
    auto it = writes.find(loc);
    if (it == writes.end()) return node;  // never written: initial zero, leaf

    // The most recent writer decides: a predecessor-region write means the
    // value was already checked at that boundary.
    if (!in_scope(it->second.back().instr)) {
      node.stopped = true;
      return node;
    }
    for (const TraceWriter& w : it->second) {
      if (in_scope(w.instr)) node.writers.push_back(w);
    }

    std::vector<Location> child_locs;
    for (const TraceWriter& w : node.writers) {
      for (const Location& operand : reads_of(w.instr)) {
        if (std::find(child_locs.begin(), child_locs.end(), operand) == child_locs.end())
          child_locs.push_back(operand);
      }
    }
    std::sort(child_locs.begin(), child_locs.end());
    for (const Location& child : child_locs) {
      if (std::find(path.begin(), path.end(), child) != path.end())
        continue;  // re-expansion guard for rewritten locations
      path.push_back(child);
      node.children.push_back(make_node(child, path));
      path.pop_back();
    }
    return node;
  }
};

}  // namespace

DepTreeNode build_tree(const Location& root, const ExecTrace& trace, const RegionGraph& graph,
                       const RegionId& current) {
  if (!graph.contains(current)) fail(ErrorCode::UnknownRegion, current.to_string());
  TreeBuilder builder{graph, current, index_writes(trace)};
  if (builder.writes.find(root) == builder.writes.end())
    fail(ErrorCode::RootNotWritten,
         root.to_string() + " was never written in the examined trace");
  std::vector<Location> path{root};
  return builder.make_node(root, path);
}

DepTreeNode build_tree_from_instruction(const Instruction& reported, const ExecTrace& trace,
                                        const RegionGraph& graph, const RegionId& current) {
  if (reported.dest) return build_tree(*reported.dest, trace, graph, current);
  if (reported.op == Opcode::BEQZ) {
    // The branch participates as a reader: root at its condition register.
    const Location& cond = reported.srcs.front();
    TreeBuilder builder{graph, current, index_writes(trace)};
    std::vector<Location> path{cond};
    return builder.make_node(cond, path);
  }
  fail(ErrorCode::RootNotWritten,
       "error-reported instruction '" + reported.to_string() + "' outputs no value");
}

namespace {

void collect_races(const DepTreeNode& node, const RegionGraph& graph,
                   std::vector<RaceFinding>& out) {
  auto region_of = [&](const Instruction& instr) {
    return graph.region_of(instr.core, instr.pc);
  };
  auto add = [&](const TraceWriter& a, const TraceWriter& b, const Location& loc,
                 bool b_is_reader) {
    const TraceWriter& first = a.step < b.step ? a : b;
    const TraceWriter& second = a.step < b.step ? b : a;
    RaceFinding f;
    f.first = first.instr;
    f.second = second.instr;
    f.location = loc;
    f.first_region = region_of(first.instr);
    f.second_region = region_of(second.instr);
    if (!b_is_reader)
      f.kind = RaceKind::WAW;
    else
      // b reads loc, a writes it: read-after-write when the write retired
      // first, write-after-read otherwise.
      f.kind = a.step < b.step ? RaceKind::RAW : RaceKind::WAR;
    out.push_back(std::move(f));
  };

  // Write-after-write conflicts live inside one node.
  for (std::size_t i = 0; i < node.writers.size(); ++i) {
    for (std::size_t j = i + 1; j < node.writers.size(); ++j) {
      RegionId ra = region_of(node.writers[i].instr);
      RegionId rb = region_of(node.writers[j].instr);
      if (ra != rb && graph.parallel(ra, rb))
        add(node.writers[i], node.writers[j], node.location, false);
    }
  }
  // Read/write conflicts pair a child's writer with a parent writer that
  // reads the child's location.
  for (const DepTreeNode& child : node.children) {
    for (const TraceWriter& writer : child.writers) {
      RegionId rw = region_of(writer.instr);
      for (const TraceWriter& reader : node.writers) {
        const auto reads = reads_of(reader.instr);
        if (std::find(reads.begin(), reads.end(), child.location) == reads.end()) continue;
        RegionId rr = region_of(reader.instr);
        if (rw != rr && graph.parallel(rw, rr)) add(writer, reader, child.location, true);
      }
    }
    collect_races(child, graph, out);
  }
}

}  // namespace

std::vector<RaceFinding> detect_races(const DepTreeNode& tree, const RegionGraph& graph) {
  std::vector<RaceFinding> all;
  collect_races(tree, graph, all);
  std::sort(all.begin(), all.end(), [](const RaceFinding& a, const RaceFinding& b) {
    if (ref_of(a.first) != ref_of(b.first)) return ref_of(a.first) < ref_of(b.first);
    if (ref_of(a.second) != ref_of(b.second)) return ref_of(a.second) < ref_of(b.second);
    return a.location < b.location;
  });
  all.erase(std::unique(all.begin(), all.end(),
                        [](const RaceFinding& a, const RaceFinding& b) {
                          return ref_of(a.first) == ref_of(b.first) &&
                                 ref_of(a.second) == ref_of(b.second) &&
                                 a.location == b.location;
                        }),
            all.end());
  return all;
}

bool all_writers_parallel(const DepTreeNode& tree, const RegionId& current,
                          const RegionGraph& graph) {
  if (tree.writers.empty()) return false;
  for (const TraceWriter& w : tree.writers) {
    RegionId r = graph.region_of(w.instr.core, w.instr.pc);
    if (r == current || !graph.parallel(r, current)) return false;
  }
  return true;
}

namespace {

void collect_instructions(const DepTreeNode& node, std::set<InstrRef>& out) {
  for (const TraceWriter& w : node.writers) out.insert(ref_of(w.instr));
  for (const DepTreeNode& child : node.children) collect_instructions(child, out);
}

void render(const DepTreeNode& node, int depth, std::ostringstream& os) {
  os << std::string(static_cast<std::size_t>(depth) * 2, ' ') << node.location.to_string();
  if (node.stopped) {
    os << " (stopped: last writer in a predecessor region)";
  } else if (node.writers.empty()) {
    os << " (never written: initial value)";
  } else {
    os << " writers:";
    for (const TraceWriter& w : node.writers)
      os << " c" << w.instr.core << "#" << w.instr.pc;
  }
  os << "\n";
  for (const DepTreeNode& child : node.children) render(child, depth + 1, os);
}

}  // namespace

std::vector<InstrRef> tree_instructions(const DepTreeNode& tree) {
  std::set<InstrRef> set;
  collect_instructions(tree, set);
  return {set.begin(), set.end()};
}

std::string tree_to_text(const DepTreeNode& tree) {
  std::ostringstream os;
  render(tree, 0, os);
  return os.str();
}

}  // namespace syncloc
