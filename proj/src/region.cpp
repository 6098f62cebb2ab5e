#include "syncloc/region.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace syncloc {

std::string barrier_name(int barrier_id) {
  if (barrier_id == kInitialBarrier) return "initial";
  if (barrier_id == kFinalBarrier) return "final";
  return "bar" + std::to_string(barrier_id);
}

std::string RegionId::to_string() const {
  return "c" + std::to_string(core) + ".s" + std::to_string(ordinal);
}

std::string SyncRegion::to_string() const {
  std::ostringstream os;
  os << id.to_string() << " [" << pc_begin << "," << pc_end << ") "
     << barrier_name(upper_barrier) << "->" << barrier_name(lower_barrier);
  return os.str();
}

std::vector<SyncRegion> divide_into_regions(const Program& prog, std::size_t* step_counter) {
  std::size_t steps = 0;
  std::vector<SyncRegion> regions;
  for (int c = 0; c < prog.core_count(); ++c) {
    const auto& seq = prog.cores[static_cast<std::size_t>(c)];
    SyncRegion cur;
    cur.id = {c, 0};
    cur.pc_begin = 0;
    cur.upper_barrier = kInitialBarrier;
    for (int pc = 0; pc < static_cast<int>(seq.size()); ++pc) {
      ++steps;
      const Instruction& instr = seq[static_cast<std::size_t>(pc)];
      if (instr.op == Opcode::SYNC) {
        cur.pc_end = pc;
        cur.lower_barrier = *instr.barrier_id;
        regions.push_back(cur);
        cur = SyncRegion{};
        cur.id = {c, regions.back().id.ordinal + 1};
        cur.pc_begin = pc + 1;
        cur.upper_barrier = *instr.barrier_id;
      } else if (instr.op == Opcode::HALT) {
        cur.pc_end = pc;  // HALT sits on the final boundary
        cur.lower_barrier = kFinalBarrier;
        regions.push_back(cur);
      }
    }
  }
  if (step_counter) *step_counter = steps;
  return regions;
}

namespace {

inline bool bit_test(const std::vector<std::uint64_t>& bits, int i) {
  return (bits[static_cast<std::size_t>(i >> 6)] >> (i & 63)) & 1u;
}

inline void bit_set(std::vector<std::uint64_t>& bits, int i) {
  bits[static_cast<std::size_t>(i >> 6)] |= std::uint64_t{1} << (i & 63);
}

}  // namespace

int RegionGraph::index_of(const RegionId& id) const {
  if (id.core < 0 || id.core >= static_cast<int>(core_region_index_.size()))
    fail(ErrorCode::UnknownRegion, id.to_string());
  const auto& row = core_region_index_[static_cast<std::size_t>(id.core)];
  if (id.ordinal < 0 || id.ordinal >= static_cast<int>(row.size()))
    fail(ErrorCode::UnknownRegion, id.to_string());
  return row[static_cast<std::size_t>(id.ordinal)];
}

bool RegionGraph::contains(const RegionId& id) const {
  return id.core >= 0 && id.core < static_cast<int>(core_region_index_.size()) &&
         id.ordinal >= 0 &&
         id.ordinal < static_cast<int>(core_region_index_[static_cast<std::size_t>(id.core)].size());
}

const SyncRegion& RegionGraph::region(const RegionId& id) const {
  return regions_[static_cast<std::size_t>(index_of(id))];
}

RegionId RegionGraph::region_of(int core, int pc) const {
  if (core < 0 || core >= static_cast<int>(core_region_index_.size()))
    fail(ErrorCode::UnknownRegion, "core " + std::to_string(core));
  const auto& row = core_region_index_[static_cast<std::size_t>(core)];
  for (int idx : row) {
    const SyncRegion& r = regions_[static_cast<std::size_t>(idx)];
    // Payload pcs fall in [begin, end); the closing SYNC sits at pc_end.
    if (pc >= r.pc_begin && pc <= r.pc_end) return r.id;
  }
  // The HALT of the final region (and anything past it) maps to the last region.
  if (!row.empty()) {
    const SyncRegion& last = regions_[static_cast<std::size_t>(row.back())];
    if (pc >= last.pc_begin) return last.id;
  }
  fail(ErrorCode::UnknownRegion,
       "pc " + std::to_string(pc) + " on core " + std::to_string(core));
}

bool RegionGraph::reaches(const RegionId& from, const RegionId& to) const {
  return bit_test(reach_[static_cast<std::size_t>(index_of(from))], index_of(to));
}

bool RegionGraph::parallel(const RegionId& a, const RegionId& b) const {
  int ia = index_of(a), ib = index_of(b);
  if (ia == ib) return false;
  return !bit_test(reach_[static_cast<std::size_t>(ia)], ib) &&
         !bit_test(reach_[static_cast<std::size_t>(ib)], ia);
}

std::vector<RegionId> RegionGraph::parallel_regions(const RegionId& r) const {
  std::vector<RegionId> out;
  for (int idx : parallel_[static_cast<std::size_t>(index_of(r))])
    out.push_back(regions_[static_cast<std::size_t>(idx)].id);
  return out;
}

RegionGraph build_region_graph(const std::vector<SyncRegion>& regions,
                               std::size_t* step_counter) {
  RegionGraph g;
  g.regions_ = regions;
  std::size_t steps = 0;

  int n = static_cast<int>(regions.size());
  for (int i = 0; i < n; ++i) {
    const SyncRegion& r = regions[static_cast<std::size_t>(i)];
    auto& row = g.core_region_index_;
    if (r.id.core >= static_cast<int>(row.size()))
      row.resize(static_cast<std::size_t>(r.id.core) + 1);
    auto& ords = row[static_cast<std::size_t>(r.id.core)];
    if (r.id.ordinal != static_cast<int>(ords.size()))
      fail(ErrorCode::UnknownRegion,
           "regions of core " + std::to_string(r.id.core) + " not in ordinal order");
    ords.push_back(i);
    ++steps;
  }

  // Edges: closing barrier of one region opens another, plus consecutive
  // regions of the same core (the same-core case is implied by the shared
  // barrier, but kept explicit).
  std::map<int, std::vector<int>> opened_by;  // barrier id -> regions it opens
  for (int i = 0; i < n; ++i) {
    int up = regions[static_cast<std::size_t>(i)].upper_barrier;
    if (up != kInitialBarrier) opened_by[up].push_back(i);
  }
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  auto add_edge = [&](int a, int b) {
    auto& row = adj[static_cast<std::size_t>(a)];
    if (std::find(row.begin(), row.end(), b) == row.end()) {
      row.push_back(b);
      g.edges_.emplace_back(regions[static_cast<std::size_t>(a)].id,
                            regions[static_cast<std::size_t>(b)].id);
    }
  };
  for (int i = 0; i < n; ++i) {
    const SyncRegion& r = regions[static_cast<std::size_t>(i)];
    if (r.lower_barrier != kFinalBarrier) {
      auto it = opened_by.find(r.lower_barrier);
      if (it != opened_by.end())
        for (int j : it->second) {
          add_edge(i, j);
          ++steps;
        }
    }
    const auto& ords = g.core_region_index_[static_cast<std::size_t>(r.id.core)];
    if (r.id.ordinal + 1 < static_cast<int>(ords.size())) {
      add_edge(i, ords[static_cast<std::size_t>(r.id.ordinal + 1)]);
      ++steps;
    }
  }

  // Reachability closure in reverse topological order, bitset unions.
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i)
    for (int j : adj[static_cast<std::size_t>(i)]) ++indegree[static_cast<std::size_t>(j)];
  std::vector<int> topo;
  topo.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    if (indegree[static_cast<std::size_t>(i)] == 0) topo.push_back(i);
  for (std::size_t head = 0; head < topo.size(); ++head) {
    for (int j : adj[static_cast<std::size_t>(topo[head])])
      if (--indegree[static_cast<std::size_t>(j)] == 0) topo.push_back(j);
  }
  if (static_cast<int>(topo.size()) != n)
    fail(ErrorCode::CycleDetected, "region graph has a cycle");

  std::size_t words = static_cast<std::size_t>((n + 63) / 64);
  g.reach_.assign(static_cast<std::size_t>(n), std::vector<std::uint64_t>(words, 0));
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    int i = *it;
    auto& bits = g.reach_[static_cast<std::size_t>(i)];
    for (int j : adj[static_cast<std::size_t>(i)]) {
      bit_set(bits, j);
      const auto& sub = g.reach_[static_cast<std::size_t>(j)];
      for (std::size_t w = 0; w < words; ++w) {
        bits[w] |= sub[w];
        ++steps;
      }
    }
  }

  g.parallel_.assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      ++steps;
      if (i == j) continue;
      if (!bit_test(g.reach_[static_cast<std::size_t>(i)], j) &&
          !bit_test(g.reach_[static_cast<std::size_t>(j)], i))
        g.parallel_[static_cast<std::size_t>(i)].push_back(j);
    }
  }

  g.build_steps_ = steps;
  if (step_counter) *step_counter = steps;
  return g;
}

RegionGraph analyze_regions(const Program& prog) {
  return build_region_graph(divide_into_regions(prog));
}

Program insert_sync_points(const Program& prog, int max_region_length) {
  if (max_region_length < 1)
    fail(ErrorCode::InvalidProgram, "max region length must be >= 1");
  int fresh = 0;
  for (const auto& seq : prog.cores)
    for (const Instruction& instr : seq)
      if (instr.op == Opcode::SYNC) fresh = std::max(fresh, *instr.barrier_id + 1);

  Program out;
  out.cores.resize(prog.cores.size());
  for (int c = 0; c < prog.core_count(); ++c) {
    const auto& seq = prog.cores[static_cast<std::size_t>(c)];
    auto& dst = out.cores[static_cast<std::size_t>(c)];

    // Splitting strictly inside a branch span would either change the branch
    // target or make it jump over the new SYNC; such split points are
    // deferred past the span (a span longer than the limit keeps its
    // region oversized rather than break the branch).
    std::vector<bool> covered(seq.size() + 1, false);
    for (const Instruction& instr : seq) {
      if (instr.op != Opcode::BEQZ) continue;
      for (int p = instr.pc + 1; p < instr.pc + *instr.branch_offset; ++p)
        if (p <= static_cast<int>(seq.size())) covered[static_cast<std::size_t>(p)] = true;
    }

    int run = 0;  // payload instructions since the last boundary
    for (const Instruction& instr : seq) {
      bool boundary = instr.op == Opcode::SYNC || instr.op == Opcode::HALT;
      if (!boundary && run >= max_region_length && !covered[static_cast<std::size_t>(instr.pc)]) {
        Instruction sync;
        sync.core = c;
        sync.pc = static_cast<int>(dst.size());
        sync.op = Opcode::SYNC;
        sync.barrier_id = fresh++;
        sync.check_class = default_check_class(Opcode::SYNC);
        dst.push_back(std::move(sync));
        run = 0;
      }
      Instruction copy = instr;
      copy.pc = static_cast<int>(dst.size());
      dst.push_back(std::move(copy));
      run = boundary ? 0 : run + 1;
    }
  }
  out.validate();
  return out;
}

std::string region_graph_to_dot(const RegionGraph& graph) {
  std::ostringstream os;
  os << "digraph regions {\n";
  for (const SyncRegion& r : graph.regions()) {
    os << "  \"" << r.id.to_string() << "\" [label=\"" << r.to_string() << "\"];\n";
  }
  for (const auto& [a, b] : graph.edges()) {
    os << "  \"" << a.to_string() << "\" -> \"" << b.to_string() << "\";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace syncloc
