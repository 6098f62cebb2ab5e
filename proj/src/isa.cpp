#include "syncloc/isa.hpp"

#include <algorithm>
#include <sstream>

namespace syncloc {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInstruction: return "MALFORMED_INSTRUCTION";
    case ErrorCode::OutOfBounds: return "OUT_OF_BOUNDS";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::InvalidProgram: return "INVALID_PROGRAM";
    case ErrorCode::Deadlock: return "DEADLOCK";
    case ErrorCode::FaultTargetMismatch: return "FAULT_TARGET_MISMATCH";
    case ErrorCode::NotAtBarrier: return "NOT_AT_BARRIER";
    case ErrorCode::CycleDetected: return "CYCLE_DETECTED";
    case ErrorCode::UnknownRegion: return "UNKNOWN_REGION";
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::IoFailure: return "IO_FAILURE";
    case ErrorCode::UnknownRef: return "UNKNOWN_REF";
    case ErrorCode::CorruptObject: return "CORRUPT_OBJECT";
    case ErrorCode::RootNotWritten: return "ROOT_NOT_WRITTEN";
    case ErrorCode::MissingModelSnapshot: return "MISSING_MODEL_SNAPSHOT";
    case ErrorCode::NoCurrentRegionTree: return "NO_CURRENT_REGION_TREE";
    case ErrorCode::NoObservableTarget: return "NO_OBSERVABLE_TARGET";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "UNKNOWN";
}

std::string Location::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case LocKind::Reg: os << "c" << core << ".r" << index; break;
    case LocKind::PrivMem: os << "c" << core << ".PRIV[" << index << "]"; break;
    case LocKind::SharedMem: os << "SHARED[" << index << "]"; break;
  }
  return os.str();
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::LI: return "LI";
    case Opcode::ADD: return "ADD";
    case Opcode::MUL: return "MUL";
    case Opcode::XOR: return "XOR";
    case Opcode::LD: return "LD";
    case Opcode::ST: return "ST";
    case Opcode::BEQZ: return "BEQZ";
    case Opcode::SYNC: return "SYNC";
    case Opcode::HALT: return "HALT";
  }
  return "?";
}

std::optional<Opcode> opcode_from_name(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  for (Opcode op : {Opcode::LI, Opcode::ADD, Opcode::MUL, Opcode::XOR, Opcode::LD,
                    Opcode::ST, Opcode::BEQZ, Opcode::SYNC, Opcode::HALT}) {
    if (upper == opcode_name(op)) return op;
  }
  return std::nullopt;
}

CheckClass default_check_class(Opcode op) {
  // Stores and branches cannot be validated at execution time.
  switch (op) {
    case Opcode::ST:
    case Opcode::BEQZ:
      return CheckClass::Lazy;
    default:
      return CheckClass::Immediate;
  }
}

namespace {

void check_location_bounds(const Location& loc, const MachineShape& shape,
                           const Instruction& instr) {
  int limit = 0;
  switch (loc.kind) {
    case LocKind::Reg: limit = shape.regs; break;
    case LocKind::PrivMem: limit = shape.priv_words; break;
    case LocKind::SharedMem: limit = shape.shared_words; break;
  }
  if (loc.index < 0 || loc.index >= limit) {
    fail(ErrorCode::OutOfBounds, loc.to_string() + " in '" + instr.to_string() +
                                     "' exceeds the configured size");
  }
  if (loc.core_scoped() && loc.core != instr.core) {
    fail(ErrorCode::MalformedInstruction,
         "core-scoped operand " + loc.to_string() + " does not belong to core " +
             std::to_string(instr.core));
  }
}

[[noreturn]] void malformed(const Instruction& instr, const std::string& why) {
  fail(ErrorCode::MalformedInstruction, "'" + instr.to_string() + "': " + why);
}

}  // namespace

void Instruction::validate(const MachineShape& shape) const {
  switch (op) {
    case Opcode::LI:
      if (!dest || dest->kind != LocKind::Reg) malformed(*this, "LI needs a register dest");
      if (!srcs.empty()) malformed(*this, "LI takes no source operands");
      if (!imm) malformed(*this, "LI needs an immediate");
      break;
    case Opcode::ADD:
    case Opcode::MUL:
    case Opcode::XOR:
      if (!dest || dest->kind != LocKind::Reg) malformed(*this, "ALU op needs a register dest");
      if (srcs.size() != 2 || srcs[0].kind != LocKind::Reg || srcs[1].kind != LocKind::Reg)
        malformed(*this, "ALU op needs two register sources");
      break;
    case Opcode::LD:
      if (!dest || dest->kind != LocKind::Reg) malformed(*this, "LD needs a register dest");
      if (srcs.size() != 1 || srcs[0].kind == LocKind::Reg)
        malformed(*this, "LD needs one memory source");
      break;
    case Opcode::ST:
      if (!dest || dest->kind == LocKind::Reg) malformed(*this, "ST needs a memory dest");
      if (srcs.size() != 1 || srcs[0].kind != LocKind::Reg)
        malformed(*this, "ST needs one register source");
      break;
    case Opcode::BEQZ:
      if (dest) malformed(*this, "BEQZ has no dest");
      if (srcs.size() != 1 || srcs[0].kind != LocKind::Reg)
        malformed(*this, "BEQZ needs one register source");
      if (!branch_offset || *branch_offset < 1)
        malformed(*this, "BEQZ needs a positive forward offset");
      break;
    case Opcode::SYNC:
      if (dest || !srcs.empty()) malformed(*this, "SYNC has no operands");
      if (!barrier_id || *barrier_id < 0) malformed(*this, "SYNC needs a barrier id");
      break;
    case Opcode::HALT:
      if (dest || !srcs.empty() || imm || barrier_id || branch_offset)
        malformed(*this, "HALT has no operands");
      break;
  }
  if (dest) check_location_bounds(*dest, shape, *this);
  for (const Location& s : srcs) check_location_bounds(s, shape, *this);
}

std::string Instruction::to_string() const {
  auto mem = [](const Location& loc) {
    std::ostringstream os;
    os << (loc.kind == LocKind::SharedMem ? "SHARED[" : "PRIV[") << loc.index << "]";
    return os.str();
  };
  std::ostringstream os;
  os << opcode_name(op);
  switch (op) {
    case Opcode::LI: os << " r" << dest->index << ", " << *imm; break;
    case Opcode::ADD:
    case Opcode::MUL:
    case Opcode::XOR:
      os << " r" << dest->index << ", r" << srcs[0].index << ", r" << srcs[1].index;
      break;
    case Opcode::LD: os << " r" << dest->index << ", " << mem(srcs[0]); break;
    case Opcode::ST: os << " " << mem(*dest) << ", r" << srcs[0].index; break;
    case Opcode::BEQZ: os << " r" << srcs[0].index << ", +" << *branch_offset; break;
    case Opcode::SYNC: os << " " << *barrier_id; break;
    case Opcode::HALT: break;
  }
  return os.str();
}

MachineState::MachineState(const MachineShape& s) : shape(s) {
  shared_mem.assign(static_cast<std::size_t>(s.shared_words), 0);
  cores.resize(static_cast<std::size_t>(s.cores));
  for (CoreState& c : cores) {
    c.priv_mem.assign(static_cast<std::size_t>(s.priv_words), 0);
    c.reg_file.assign(static_cast<std::size_t>(s.regs), 0);
  }
}

Word MachineState::read(const Location& loc) const {
  switch (loc.kind) {
    case LocKind::SharedMem: return shared_mem.at(static_cast<std::size_t>(loc.index));
    case LocKind::PrivMem:
      return cores.at(static_cast<std::size_t>(loc.core))
          .priv_mem.at(static_cast<std::size_t>(loc.index));
    case LocKind::Reg:
      return cores.at(static_cast<std::size_t>(loc.core))
          .reg_file.at(static_cast<std::size_t>(loc.index));
  }
  fail(ErrorCode::Internal, "unreachable location kind");
}

void MachineState::write(const Location& loc, Word value) {
  switch (loc.kind) {
    case LocKind::SharedMem:
      shared_mem.at(static_cast<std::size_t>(loc.index)) = value;
      return;
    case LocKind::PrivMem:
      cores.at(static_cast<std::size_t>(loc.core))
          .priv_mem.at(static_cast<std::size_t>(loc.index)) = value;
      return;
    case LocKind::Reg:
      cores.at(static_cast<std::size_t>(loc.core))
          .reg_file.at(static_cast<std::size_t>(loc.index)) = value;
      return;
  }
}

bool MachineState::all_halted() const {
  for (const CoreState& c : cores)
    if (!c.halted) return false;
  return true;
}

namespace {

// Two's-complement wrap-around arithmetic on 64-bit words.
Word alu(Opcode op, Word a, Word b) {
  auto ua = static_cast<std::uint64_t>(a);
  auto ub = static_cast<std::uint64_t>(b);
  std::uint64_t r = 0;
  switch (op) {
    case Opcode::ADD: r = ua + ub; break;
    case Opcode::MUL: r = ua * ub; break;
    case Opcode::XOR: r = ua ^ ub; break;
    default: fail(ErrorCode::Internal, "not an ALU opcode");
  }
  return static_cast<Word>(r);
}

}  // namespace

StepResult execute_one(MachineState& state, const Instruction& instr) {
  instr.validate(state.shape);
  CoreState& core = state.cores.at(static_cast<std::size_t>(instr.core));
  if (core.halted || core.waiting_barrier)
    fail(ErrorCode::Internal, "core is not runnable");

  StepResult result;
  switch (instr.op) {
    case Opcode::LI:
      result.writes.emplace_back(*instr.dest, *instr.imm);
      break;
    case Opcode::ADD:
    case Opcode::MUL:
    case Opcode::XOR:
      result.writes.emplace_back(
          *instr.dest, alu(instr.op, state.read(instr.srcs[0]), state.read(instr.srcs[1])));
      break;
    case Opcode::LD:
      result.writes.emplace_back(*instr.dest, state.read(instr.srcs[0]));
      break;
    case Opcode::ST:
      result.writes.emplace_back(*instr.dest, state.read(instr.srcs[0]));
      break;
    case Opcode::BEQZ:
      result.branch_taken = state.read(instr.srcs[0]) == 0;
      break;
    case Opcode::SYNC:
      break;
    case Opcode::HALT:
      core.halted = true;
      return result;  // pc frozen at the HALT
  }
  for (const auto& [loc, value] : result.writes) state.write(loc, value);
  core.pc += result.branch_taken ? *instr.branch_offset : 1;
  return result;
}

std::vector<Location> reads_of(const Instruction& instr) {
  return instr.srcs;
}

std::vector<Location> writes_of(const Instruction& instr) {
  if (instr.dest) return {*instr.dest};
  return {};
}

}  // namespace syncloc
