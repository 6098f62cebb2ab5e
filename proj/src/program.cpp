#include "syncloc/program.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace syncloc {

int Program::total_instructions() const {
  int n = 0;
  for (const auto& seq : cores) n += static_cast<int>(seq.size());
  return n;
}

MachineShape Program::shape() const {
  MachineShape s;
  s.cores = core_count();
  return s;
}

const Instruction& Program::at(int core, int pc) const {
  if (core < 0 || core >= core_count())
    fail(ErrorCode::OutOfBounds, "no core " + std::to_string(core));
  const auto& seq = cores[static_cast<std::size_t>(core)];
  if (pc < 0 || pc >= static_cast<int>(seq.size()))
    fail(ErrorCode::OutOfBounds,
         "no pc " + std::to_string(pc) + " on core " + std::to_string(core));
  return seq[static_cast<std::size_t>(pc)];
}

std::vector<int> Program::barrier_participants(int barrier_id) const {
  std::vector<int> out;
  for (int c = 0; c < core_count(); ++c) {
    for (const Instruction& instr : cores[static_cast<std::size_t>(c)]) {
      if (instr.op == Opcode::SYNC && *instr.barrier_id == barrier_id) {
        out.push_back(c);
        break;
      }
    }
  }
  return out;
}

std::vector<int> Program::barrier_order() const {
  // Kahn's algorithm over the union of per-core barrier orders.
  std::map<int, std::set<int>> succ;
  std::map<int, int> indegree;
  for (const auto& seq : cores) {
    int prev = -1;
    for (const Instruction& instr : seq) {
      if (instr.op != Opcode::SYNC) continue;
      int id = *instr.barrier_id;
      indegree.emplace(id, 0);
      if (prev >= 0 && succ[prev].insert(id).second) ++indegree[id];
      prev = id;
    }
  }
  std::set<int> ready;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.insert(id);
  std::vector<int> order;
  while (!ready.empty()) {
    int id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (int next : succ[id])
      if (--indegree[next] == 0) ready.insert(next);
  }
  if (order.size() != indegree.size())
    fail(ErrorCode::CycleDetected, "barrier orders of different cores conflict");
  return order;
}

void Program::validate() const {
  if (cores.empty()) fail(ErrorCode::InvalidProgram, "program has no cores");
  const MachineShape s = shape();
  for (int c = 0; c < core_count(); ++c) {
    const auto& seq = cores[static_cast<std::size_t>(c)];
    if (seq.empty() || seq.back().op != Opcode::HALT)
      fail(ErrorCode::InvalidProgram,
           "core " + std::to_string(c) + " does not end with HALT");
    std::set<int> seen_barriers;
    for (int pc = 0; pc < static_cast<int>(seq.size()); ++pc) {
      const Instruction& instr = seq[static_cast<std::size_t>(pc)];
      if (instr.core != c || instr.pc != pc)
        fail(ErrorCode::InvalidProgram, "instruction labeled " + std::to_string(instr.core) +
                                            "#" + std::to_string(instr.pc) +
                                            " stored at core " + std::to_string(c) + " pc " +
                                            std::to_string(pc));
      instr.validate(s);
      if (instr.op == Opcode::HALT && pc + 1 != static_cast<int>(seq.size()))
        fail(ErrorCode::InvalidProgram, "HALT before the end of core " + std::to_string(c));
      if (instr.op == Opcode::SYNC && !seen_barriers.insert(*instr.barrier_id).second)
        fail(ErrorCode::InvalidProgram, "barrier " + std::to_string(*instr.barrier_id) +
                                            " appears twice on core " + std::to_string(c));
      if (instr.op == Opcode::BEQZ) {
        int target = pc + *instr.branch_offset;
        if (target >= static_cast<int>(seq.size()))
          fail(ErrorCode::InvalidProgram,
               "branch at core " + std::to_string(c) + " pc " + std::to_string(pc) +
                   " jumps past the end");
        // A branch skipping a SYNC would let the core bypass a barrier other
        // cores wait on; branches must stay inside their region.
        for (int q = pc + 1; q < target; ++q) {
          if (seq[static_cast<std::size_t>(q)].op == Opcode::SYNC)
            fail(ErrorCode::InvalidProgram,
                 "branch at core " + std::to_string(c) + " pc " + std::to_string(pc) +
                     " jumps over SYNC at pc " + std::to_string(q));
        }
      }
    }
  }
  barrier_order();  // throws CycleDetected on inconsistent barrier orders
}

namespace {

struct Cursor {
  std::string_view text;
  std::size_t line_no = 0;
};

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& why) {
  fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + why);
}

std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_operands(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      parts.push_back(strip(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!strip(cur).empty() || !parts.empty()) parts.push_back(strip(cur));
  return parts;
}

long long parse_int(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used, 10);
    if (used != s.size()) parse_fail(line_no, "bad integer '" + s + "'");
    return v;
  } catch (const std::exception&) {
    parse_fail(line_no, "bad integer '" + s + "'");
  }
}

Location parse_reg(const std::string& s, int core, std::size_t line_no) {
  if (s.size() < 2 || (s[0] != 'r' && s[0] != 'R'))
    parse_fail(line_no, "expected register, got '" + s + "'");
  return Location::reg(core, static_cast<int>(parse_int(s.substr(1), line_no)));
}

Location parse_mem(const std::string& s, int core, std::size_t line_no) {
  std::string upper(s);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  auto open = upper.find('[');
  auto close = upper.find(']');
  if (open == std::string::npos || close == std::string::npos || close < open)
    parse_fail(line_no, "expected memory operand, got '" + s + "'");
  int index = static_cast<int>(parse_int(strip(s.substr(open + 1, close - open - 1)), line_no));
  std::string base = strip(upper.substr(0, open));
  if (base == "SHARED") return Location::shared(index);
  if (base == "PRIV") return Location::priv(core, index);
  parse_fail(line_no, "unknown memory space '" + base + "'");
}

}  // namespace

Program parse_program(std::string_view text) {
  Program prog;
  int current_core = -1;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string line = strip(raw);
    if (line.empty()) continue;

    std::string lowered(line);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (lowered.rfind("core", 0) == 0 && line.back() == ':') {
      long long idx = parse_int(strip(line.substr(4, line.size() - 5)), line_no);
      if (idx < 0 || idx > 4096) parse_fail(line_no, "bad core index");
      current_core = static_cast<int>(idx);
      if (current_core >= static_cast<int>(prog.cores.size()))
        prog.cores.resize(static_cast<std::size_t>(current_core) + 1);
      continue;
    }
    if (current_core < 0) parse_fail(line_no, "instruction before any 'core <k>:' header");

    auto space = line.find_first_of(" \t");
    std::string mnemonic = space == std::string::npos ? line : line.substr(0, space);
    auto op = opcode_from_name(mnemonic);
    if (!op) parse_fail(line_no, "unknown opcode '" + mnemonic + "'");
    std::vector<std::string> ops =
        space == std::string::npos ? std::vector<std::string>{} : split_operands(line.substr(space + 1));

    auto& seq = prog.cores[static_cast<std::size_t>(current_core)];
    Instruction instr;
    instr.core = current_core;
    instr.pc = static_cast<int>(seq.size());
    instr.op = *op;
    instr.check_class = default_check_class(*op);
    auto want = [&](std::size_t count) {
      if (ops.size() != count)
        parse_fail(line_no, std::string(opcode_name(*op)) + " takes " + std::to_string(count) +
                                " operand(s), got " + std::to_string(ops.size()));
    };
    switch (*op) {
      case Opcode::LI:
        want(2);
        instr.dest = parse_reg(ops[0], current_core, line_no);
        instr.imm = parse_int(ops[1], line_no);
        break;
      case Opcode::ADD:
      case Opcode::MUL:
      case Opcode::XOR:
        want(3);
        instr.dest = parse_reg(ops[0], current_core, line_no);
        instr.srcs = {parse_reg(ops[1], current_core, line_no),
                      parse_reg(ops[2], current_core, line_no)};
        break;
      case Opcode::LD:
        want(2);
        instr.dest = parse_reg(ops[0], current_core, line_no);
        instr.srcs = {parse_mem(ops[1], current_core, line_no)};
        break;
      case Opcode::ST:
        want(2);
        instr.dest = parse_mem(ops[0], current_core, line_no);
        instr.srcs = {parse_reg(ops[1], current_core, line_no)};
        break;
      case Opcode::BEQZ: {
        want(2);
        instr.srcs = {parse_reg(ops[0], current_core, line_no)};
        std::string off = ops[1];
        if (!off.empty() && off[0] == '+') off.erase(0, 1);
        instr.branch_offset = static_cast<int>(parse_int(off, line_no));
        break;
      }
      case Opcode::SYNC:
        want(1);
        instr.barrier_id = static_cast<int>(parse_int(ops[0], line_no));
        break;
      case Opcode::HALT:
        want(0);
        break;
    }
    seq.push_back(std::move(instr));
  }
  prog.validate();
  return prog;
}

Program load_program(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open program file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_program(buf.str());
}

std::string format_program(const Program& prog) {
  std::ostringstream os;
  for (int c = 0; c < prog.core_count(); ++c) {
    os << "core " << c << ":\n";
    for (const Instruction& instr : prog.cores[static_cast<std::size_t>(c)])
      os << "  " << instr.to_string() << "\n";
  }
  return os.str();
}

}  // namespace syncloc
