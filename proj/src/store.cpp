#include "syncloc/store.hpp"

#include <fstream>
#include <sstream>

namespace syncloc {

namespace fs = std::filesystem;

const char* branch_name(Branch b) {
  return b == Branch::Machine ? "machine" : "model";
}

std::string StoreRef::to_string() const {
  return std::string(branch_name(branch)) + ":" + barrier_key + ":" + std::to_string(version);
}

namespace {

std::string shape_line(const MachineShape& s) {
  std::ostringstream os;
  os << "shape " << s.cores << " " << s.regs << " " << s.priv_words << " " << s.shared_words;
  return os.str();
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return data;
}

}  // namespace

SnapshotStore::SnapshotStore(fs::path root, const MachineShape& shape)
    : root_(std::move(root)), shape_(shape) {
  std::error_code ec;
  fs::create_directories(root_ / "objects", ec);
  fs::create_directories(root_ / "refs" / "machine", ec);
  fs::create_directories(root_ / "refs" / "model", ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create store at " + root_.string());

  fs::path meta = root_ / "meta";
  if (fs::exists(meta)) {
    std::ifstream in(meta);
    std::string algo_line, shp_line;
    std::getline(in, algo_line);
    std::getline(in, shp_line);
    if (algo_line != "hash sha-256")
      fail(ErrorCode::IoFailure, "store uses an unknown hash: " + algo_line);
    if (shp_line != shape_line(shape_))
      fail(ErrorCode::ShapeMismatch, "store was created with " + shp_line);
  } else {
    std::ofstream out(meta);
    out << "hash sha-256\n" << shape_line(shape_) << "\n";
    if (!out) fail(ErrorCode::IoFailure, "cannot write store meta");
  }
}

fs::path SnapshotStore::object_path(const Digest& hash) const {
  return root_ / "objects" / digest_hex(hash);
}

fs::path SnapshotStore::ref_path(Branch branch, const std::string& barrier_key) const {
  return root_ / "refs" / branch_name(branch) / barrier_key;
}

void SnapshotStore::write_object(const SnapshotNode& node) {
  for (const SnapshotNode& child : node.children) write_object(child);
  fs::path path = object_path(node.hash);
  if (fs::exists(path)) return;  // content addressed: store identical payloads once
  auto payload = node.payload();
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) fail(ErrorCode::IoFailure, "cannot write object " + path.string());
}

StoreRef SnapshotStore::commit(Branch branch, const std::string& barrier_key,
                               const Snapshot& snap) {
  if (snap.shape() != shape_)
    fail(ErrorCode::ShapeMismatch, "snapshot shape does not match the store");
  write_object(snap.root);
  int version = version_count(branch, barrier_key) + 1;
  std::ofstream out(ref_path(branch, barrier_key), std::ios::app);
  out << digest_hex(snap.root_hash()) << "\n";
  if (!out) fail(ErrorCode::IoFailure, "cannot append ref for " + barrier_key);
  return StoreRef{branch, barrier_key, version};
}

int SnapshotStore::version_count(Branch branch, const std::string& barrier_key) const {
  std::ifstream in(ref_path(branch, barrier_key));
  if (!in) return 0;
  int count = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++count;
  return count;
}

std::optional<StoreRef> SnapshotStore::latest(Branch branch,
                                              const std::string& barrier_key) const {
  int count = version_count(branch, barrier_key);
  if (count == 0) return std::nullopt;
  return StoreRef{branch, barrier_key, count};
}

SnapshotNode SnapshotStore::read_object(const Digest& hash, const std::string& name) const {
  fs::path path = object_path(hash);
  if (!fs::exists(path)) fail(ErrorCode::UnknownRef, "missing object " + digest_hex(hash));
  auto payload = read_file_bytes(path);
  if (sha256(payload.data(), payload.size()) != hash)
    fail(ErrorCode::CorruptObject, "object " + digest_hex(hash) + " fails its hash check");

  SnapshotNode node;
  node.name = name;
  node.hash = hash;
  if (payload.size() < 16) fail(ErrorCode::CorruptObject, "object too short");
  std::string magic(payload.begin(), payload.begin() + 8);
  auto read_u64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(payload[at + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  };
  std::uint64_t count = read_u64(8);
  std::size_t at = 16;
  if (magic == "snapleaf") {
    if (payload.size() != 16 + count * 8) fail(ErrorCode::CorruptObject, "bad leaf size");
    node.words.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i, at += 8)
      node.words.push_back(static_cast<Word>(read_u64(at)));
  } else if (magic == "snaptree") {
    for (std::uint64_t i = 0; i < count; ++i) {
      std::size_t name_end = at;
      while (name_end < payload.size() && payload[name_end] != 0) ++name_end;
      if (name_end + 1 + 32 > payload.size()) fail(ErrorCode::CorruptObject, "bad tree entry");
      std::string child_name(payload.begin() + static_cast<std::ptrdiff_t>(at),
                             payload.begin() + static_cast<std::ptrdiff_t>(name_end));
      Digest child_hash{};
      std::copy(payload.begin() + static_cast<std::ptrdiff_t>(name_end) + 1,
                payload.begin() + static_cast<std::ptrdiff_t>(name_end) + 33,
                child_hash.begin());
      at = name_end + 33;
      node.children.push_back(read_object(child_hash, child_name));
    }
  } else {
    fail(ErrorCode::CorruptObject, "unknown object magic");
  }
  return node;
}

Snapshot SnapshotStore::checkout(const StoreRef& ref) const {
  std::ifstream in(ref_path(ref.branch, ref.barrier_key));
  if (!in) fail(ErrorCode::UnknownRef, ref.to_string());
  std::string line;
  int version = 0;
  std::string hex;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (++version == ref.version) {
      hex = line;
      break;
    }
  }
  if (hex.empty()) fail(ErrorCode::UnknownRef, ref.to_string());
  if (hex.size() != 64) fail(ErrorCode::CorruptObject, "bad ref line for " + ref.to_string());
  Digest hash{};
  for (std::size_t i = 0; i < 32; ++i) {
    auto nibble = [&](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      fail(ErrorCode::CorruptObject, "bad hex in ref line");
    };
    hash[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  }
  Snapshot snap;
  snap.root = read_object(hash, "state");
  return snap;
}

std::size_t SnapshotStore::object_count() const {
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(root_ / "objects")) ++n;
  return n;
}

std::size_t SnapshotStore::leaf_object_count() const {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(root_ / "objects")) {
    std::ifstream in(entry.path(), std::ios::binary);
    char magic[8] = {};
    in.read(magic, 8);
    if (in && std::string(magic, 8) == "snapleaf") ++n;
  }
  return n;
}

}  // namespace syncloc
