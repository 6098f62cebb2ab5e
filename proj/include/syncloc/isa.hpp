#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "syncloc/error.hpp"

namespace syncloc {

using Word = std::int64_t;

// Machine geometry. Word cells are 64-bit two's complement, zero-initialized.
struct MachineShape {
  int cores = 1;
  int regs = 16;
  int priv_words = 256;
  int shared_words = 1024;

  friend bool operator==(const MachineShape&, const MachineShape&) = default;
};

enum class LocKind : std::uint8_t { Reg, PrivMem, SharedMem };

// One addressable state cell: a register or private-memory word of a core,
// or a shared-memory word. Equality over all present fields is the key for
// snapshot diffing and dependency-tree node identity.
struct Location {
  LocKind kind = LocKind::Reg;
  int core = -1;  // -1 for shared memory
  int index = 0;

  static Location reg(int core, int index) { return {LocKind::Reg, core, index}; }
  static Location priv(int core, int index) { return {LocKind::PrivMem, core, index}; }
  static Location shared(int index) { return {LocKind::SharedMem, -1, index}; }

  bool core_scoped() const { return kind != LocKind::SharedMem; }

  // Canonical order follows the snapshot tree traversal: shared memory
  // first, then per core private memory before the register file.
  std::array<int, 4> sort_key() const {
    if (kind == LocKind::SharedMem) return {0, 0, 0, index};
    return {1, core, kind == LocKind::PrivMem ? 0 : 1, index};
  }

  friend bool operator==(const Location&, const Location&) = default;
  friend std::strong_ordering operator<=>(const Location& a, const Location& b) {
    return a.sort_key() <=> b.sort_key();
  }

  std::string to_string() const;
};

struct LocationHash {
  std::size_t operator()(const Location& loc) const {
    std::size_t h = static_cast<std::size_t>(loc.kind);
    h = h * 1000003u ^ static_cast<std::size_t>(loc.core + 1);
    h = h * 1000003u ^ static_cast<std::size_t>(loc.index);
    return h;
  }
};

enum class Opcode : std::uint8_t { LI, ADD, MUL, XOR, LD, ST, BEQZ, SYNC, HALT };

const char* opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);

// Whether the scoreboard can validate the instruction's result right after
// it executes (IMMEDIATE) or only later through state comparison (LAZY).
enum class CheckClass : std::uint8_t { Immediate, Lazy };

CheckClass default_check_class(Opcode op);

// One decoded per-core instruction. Core-scoped operands always refer to the
// instruction's own core.
struct Instruction {
  int core = 0;
  int pc = 0;
  Opcode op = Opcode::HALT;
  std::optional<Location> dest;
  std::vector<Location> srcs;
  std::optional<Word> imm;
  std::optional<int> barrier_id;      // SYNC only
  std::optional<int> branch_offset;   // BEQZ only, forward-only (>= 1)
  CheckClass check_class = CheckClass::Immediate;

  // Throws MalformedInstruction / OutOfBounds on invariant violations.
  void validate(const MachineShape& shape) const;

  std::string to_string() const;  // program-text form, without core prefix
};

// (core, pc) instruction handle, ordered lexicographically by (pc, core):
// the "smallest pc" rule with core index as the cross-core tie break.
struct InstrRef {
  int core = 0;
  int pc = 0;

  friend bool operator==(const InstrRef&, const InstrRef&) = default;
  friend std::strong_ordering operator<=>(const InstrRef& a, const InstrRef& b) {
    if (auto c = a.pc <=> b.pc; c != 0) return c;
    return a.core <=> b.core;
  }
};

inline InstrRef ref_of(const Instruction& instr) { return {instr.core, instr.pc}; }

inline bool pc_order_less(const Instruction& a, const Instruction& b) {
  return ref_of(a) < ref_of(b);
}

struct CoreState {
  std::vector<Word> priv_mem;
  std::vector<Word> reg_file;
  int pc = 0;
  bool halted = false;
  std::optional<int> waiting_barrier;
};

struct MachineState {
  MachineShape shape;
  std::vector<Word> shared_mem;
  std::vector<CoreState> cores;

  MachineState() : MachineState(MachineShape{}) {}
  explicit MachineState(const MachineShape& s);

  Word read(const Location& loc) const;
  void write(const Location& loc, Word value);
  bool all_halted() const;

  friend bool operator==(const MachineState&, const MachineState&) = default;
};

struct StepResult {
  std::vector<std::pair<Location, Word>> writes;
  bool branch_taken = false;
};

// Executes one instruction on the state: applies writes and advances the pc
// (by branch_offset on a taken BEQZ, by one otherwise). The core must be
// neither halted nor waiting at a barrier; SYNC is executed at release time.
StepResult execute_one(MachineState& state, const Instruction& instr);

// Pure data-dependence views: the locations an instruction reads (its
// operands, including the BEQZ condition register) and writes.
std::vector<Location> reads_of(const Instruction& instr);
std::vector<Location> writes_of(const Instruction& instr);

}  // namespace syncloc
