#include "syncloc/snapshot.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <sstream>

namespace syncloc {

std::string digest_hex(const Digest& d) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : d) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

Digest sha256(const void* data, std::size_t size) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data, size, out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    fail(ErrorCode::Internal, "sha256 failed");
  return out;
}

namespace {

void append_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

constexpr char kLeafMagic[] = "snapleaf";
constexpr char kTreeMagic[] = "snaptree";

}  // namespace

std::vector<std::uint8_t> SnapshotNode::payload() const {
  std::vector<std::uint8_t> buf;
  if (is_leaf()) {
    buf.insert(buf.end(), kLeafMagic, kLeafMagic + 8);
    append_u64(buf, words.size());
    for (Word w : words) append_u64(buf, static_cast<std::uint64_t>(w));
  } else {
    buf.insert(buf.end(), kTreeMagic, kTreeMagic + 8);
    append_u64(buf, children.size());
    for (const SnapshotNode& child : children) {
      buf.insert(buf.end(), child.name.begin(), child.name.end());
      buf.push_back(0);
      buf.insert(buf.end(), child.hash.begin(), child.hash.end());
    }
  }
  return buf;
}

void SnapshotNode::rehash() {
  for (SnapshotNode& child : children) child.rehash();
  auto buf = payload();
  hash = sha256(buf.data(), buf.size());
}

Snapshot Snapshot::from_state(const MachineState& state) {
  Snapshot snap;
  snap.root.name = "state";
  SnapshotNode shared;
  shared.name = "shared_mem";
  shared.words = state.shared_mem;
  snap.root.children.push_back(std::move(shared));
  for (std::size_t c = 0; c < state.cores.size(); ++c) {
    SnapshotNode core;
    core.name = "core" + std::to_string(c);
    SnapshotNode priv;
    priv.name = "priv_mem";
    priv.words = state.cores[c].priv_mem;
    SnapshotNode regs;
    regs.name = "reg_file";
    regs.words = state.cores[c].reg_file;
    core.children.push_back(std::move(priv));
    core.children.push_back(std::move(regs));
    snap.root.children.push_back(std::move(core));
  }
  snap.root.rehash();
  return snap;
}

MachineState Snapshot::to_state() const {
  MachineState state(shape());
  state.shared_mem = root.children[0].words;
  for (std::size_t c = 1; c < root.children.size(); ++c) {
    state.cores[c - 1].priv_mem = root.children[c].children[0].words;
    state.cores[c - 1].reg_file = root.children[c].children[1].words;
  }
  return state;
}

MachineShape Snapshot::shape() const {
  if (root.children.empty() || root.children[0].name != "shared_mem")
    fail(ErrorCode::ShapeMismatch, "snapshot has no shared_mem leaf");
  MachineShape s;
  s.cores = static_cast<int>(root.children.size()) - 1;
  s.shared_words = static_cast<int>(root.children[0].words.size());
  if (s.cores > 0) {
    const SnapshotNode& core0 = root.children[1];
    if (core0.children.size() != 2)
      fail(ErrorCode::ShapeMismatch, "core node must hold priv_mem and reg_file");
    s.priv_words = static_cast<int>(core0.children[0].words.size());
    s.regs = static_cast<int>(core0.children[1].words.size());
  }
  return s;
}

bool Snapshot::shape_compatible(const Snapshot& other) const {
  return shape() == other.shape();
}

Snapshot snapshot_at_barrier(const MachineState& state) {
  bool any_waiting = false;
  for (const CoreState& c : state.cores)
    if (c.waiting_barrier) any_waiting = true;
  if (!any_waiting && !state.all_halted())
    fail(ErrorCode::NotAtBarrier, "no core is parked at a barrier and the machine is running");
  return Snapshot::from_state(state);
}

std::vector<Location> DiffEntry::locations() const {
  std::vector<Location> out;
  out.reserve(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    Location loc = begin;
    loc.index += i;
    out.push_back(loc);
  }
  return out;
}

std::string DiffEntry::to_string() const {
  std::ostringstream os;
  os << begin.to_string();
  if (length > 1) os << "..+" << length;
  os << " machine=[";
  for (int i = 0; i < length; ++i) os << (i ? " " : "") << machine_values[static_cast<std::size_t>(i)];
  os << "] model=[";
  for (int i = 0; i < length; ++i) os << (i ? " " : "") << model_values[static_cast<std::size_t>(i)];
  os << "]";
  return os.str();
}

std::string DiffReport::to_text() const {
  if (entries.empty()) return "snapshots identical\n";
  std::ostringstream os;
  for (const DiffEntry& e : entries) os << e.to_string() << "\n";
  return os.str();
}

namespace {

Location leaf_base_location(const std::string& core_name, const std::string& leaf_name) {
  if (leaf_name == "shared_mem") return Location::shared(0);
  int core = std::stoi(core_name.substr(4));
  if (leaf_name == "priv_mem") return Location::priv(core, 0);
  return Location::reg(core, 0);
}

void diff_leaf(const SnapshotNode& a, const SnapshotNode& b, const Location& base,
               DiffReport& report) {
  if (a.words.size() != b.words.size())
    fail(ErrorCode::ShapeMismatch, "leaf sizes differ at " + a.name);
  std::size_t i = 0;
  while (i < a.words.size()) {
    if (a.words[i] == b.words[i]) {
      ++i;
      continue;
    }
    DiffEntry entry;
    entry.begin = base;
    entry.begin.index = static_cast<int>(i);
    while (i < a.words.size() && a.words[i] != b.words[i]) {
      entry.machine_values.push_back(a.words[i]);
      entry.model_values.push_back(b.words[i]);
      ++entry.length;
      ++i;
    }
    report.entries.push_back(std::move(entry));
  }
}

}  // namespace

DiffReport diff_snapshots(const Snapshot& machine, const Snapshot& model) {
  if (!machine.shape_compatible(model))
    fail(ErrorCode::ShapeMismatch, "snapshots have different shapes");
  DiffReport report;
  if (machine.root.hash == model.root.hash) return report;

  const auto& ra = machine.root.children;
  const auto& rb = model.root.children;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].hash == rb[i].hash) continue;
    if (ra[i].is_leaf()) {
      diff_leaf(ra[i], rb[i], leaf_base_location("", ra[i].name), report);
    } else {
      for (std::size_t j = 0; j < ra[i].children.size(); ++j) {
        if (ra[i].children[j].hash == rb[i].children[j].hash) continue;
        diff_leaf(ra[i].children[j], rb[i].children[j],
                  leaf_base_location(ra[i].name, ra[i].children[j].name), report);
      }
    }
  }
  return report;
}

}  // namespace syncloc
