#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "syncloc/isa.hpp"

namespace syncloc {

// A multicore program: one instruction list per core, each ending in HALT.
// Barrier discipline: a barrier id appears at most once per core, the
// per-core barrier orders are mutually consistent (no circular waits), and a
// barrier synchronizes exactly the cores whose programs contain it.
struct Program {
  std::vector<std::vector<Instruction>> cores;

  int core_count() const { return static_cast<int>(cores.size()); }
  int total_instructions() const;  // the paper-style symbol n

  MachineShape shape() const;

  const Instruction& at(int core, int pc) const;
  const Instruction& at(const InstrRef& ref) const { return at(ref.core, ref.pc); }

  // Distinct barrier ids in a global order consistent with every core's
  // program order (a topological order of the barrier precedence graph).
  std::vector<int> barrier_order() const;

  // Cores whose program contains SYNC with this id.
  std::vector<int> barrier_participants(int barrier_id) const;

  // Throws InvalidProgram / MalformedInstruction / OutOfBounds / CycleDetected.
  void validate() const;
};

// Program text: per-core sections headed by `core <k>:`, one instruction per
// line, `#` comments, case-insensitive opcodes.
Program parse_program(std::string_view text);
Program load_program(const std::string& path);
std::string format_program(const Program& prog);

}  // namespace syncloc
