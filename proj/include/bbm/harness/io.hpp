#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "bbm/core.hpp"
#include "bbm/stats.hpp"

namespace bbm::harness {

inline constexpr const char* kSnapshotSchema = "bbm.snapshot/1";
inline constexpr const char* kRunSchema = "bbm.run/1";
inline constexpr const char* kNeveuSchema = "bbm.neveu/1";
inline constexpr const char* kExtinctionSchema = "bbm.extinction/1";
inline constexpr const char* kAcceptanceSchema = "bbm.acceptance/1";

/// Paths of in-flight `.partial` files, kept in fixed storage so a signal
/// handler can unlink them.
class PartialRegistry {
 public:
  static constexpr std::size_t kSlots = 64;
  static constexpr std::size_t kPathMax = 4096;

  static int add(const std::string& path) {
    if (path.size() >= kPathMax) return -1;
    for (std::size_t i = 0; i < kSlots; ++i) {
      bool expected = false;
      if (used()[i].compare_exchange_strong(expected, true)) {
        std::memcpy(paths()[i].data(), path.c_str(), path.size() + 1);
        ready()[i].store(true);
        return static_cast<int>(i);
      }
    }
    return -1;
  }

  static void remove(int slot) noexcept {
    if (slot < 0) return;
    ready()[slot].store(false);
    used()[slot].store(false);
  }

  /// Async-signal-safe.
  static void unlink_all() noexcept {
    for (std::size_t i = 0; i < kSlots; ++i)
      if (ready()[i].load()) ::unlink(paths()[i].data());
  }

 private:
  static std::array<std::atomic<bool>, kSlots>& used() {
    static std::array<std::atomic<bool>, kSlots> v{};
    return v;
  }
  static std::array<std::atomic<bool>, kSlots>& ready() {
    static std::array<std::atomic<bool>, kSlots> v{};
    return v;
  }
  static std::array<std::array<char, kPathMax>, kSlots>& paths() {
    static std::array<std::array<char, kPathMax>, kSlots> v{};
    return v;
  }
};

/// Output file written to `<path>.partial` and renamed into place on
/// commit(); an uncommitted file is removed on destruction.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path path) : path_(std::move(path)), tmp_(path_) {
    tmp_ += ".partial";
    out_.open(tmp_, std::ios::out | std::ios::trunc | std::ios::binary);
    if (!out_) throw std::runtime_error("cannot open " + tmp_.string() + " for writing");
    slot_ = PartialRegistry::add(std::filesystem::absolute(tmp_).string());
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    PartialRegistry::remove(slot_);
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  std::ofstream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed for " + tmp_.string());
    out_.close();
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
    PartialRegistry::remove(slot_);
    slot_ = -1;
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
  int slot_ = -1;
};

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

/// One JSONL record per (replicate, record time).
struct SnapshotRecord {
  std::uint64_t replicate = 0;
  double time = 0.0;
  std::size_t n = 0;
  double y = 0.0;
  std::optional<double> z;
  double m = 0.0;
  std::optional<double> x1;
  std::uint64_t origin_kills = 0;
  std::uint64_t right_kills = 0;
  std::optional<std::vector<double>> positions;

  static SnapshotRecord from(std::uint64_t replicate, const Snapshot& snap, const BoundarySpec& spec,
                             bool full_positions) {
    const auto st = stats::snapshot_stats(snap, spec);
    SnapshotRecord r;
    r.replicate = replicate;
    r.time = snap.time;
    r.n = st.N;
    r.y = st.Y;
    r.z = st.Z;
    r.m = st.M;
    r.x1 = st.X1;
    r.origin_kills = snap.cumulative_origin_kills;
    r.right_kills = snap.cumulative_right_kills;
    if (full_positions) r.positions = snap.positions;
    return r;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j = {{"schema", kSnapshotSchema}, {"replicate", replicate}, {"time", time},
                        {"n", n},                    {"y", y},                 {"z", optional_number(z)},
                        {"m", m},                    {"x1", optional_number(x1)}, {"origin_kills", origin_kills},
                        {"right_kills", right_kills}};
    if (positions) j["positions"] = *positions;
    return j;
  }

  static SnapshotRecord from_json(const nlohmann::json& j) {
    if (j.at("schema").get<std::string>() != kSnapshotSchema)
      throw std::runtime_error("unexpected schema " + j.at("schema").get<std::string>());
    SnapshotRecord r;
    r.replicate = j.at("replicate").get<std::uint64_t>();
    r.time = j.at("time").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.y = j.at("y").get<double>();
    if (!j.at("z").is_null()) r.z = j.at("z").get<double>();
    r.m = j.at("m").get<double>();
    if (!j.at("x1").is_null()) r.x1 = j.at("x1").get<double>();
    r.origin_kills = j.at("origin_kills").get<std::uint64_t>();
    r.right_kills = j.at("right_kills").get<std::uint64_t>();
    if (j.contains("positions")) r.positions = j.at("positions").get<std::vector<double>>();
    return r;
  }

  friend bool operator==(const SnapshotRecord&, const SnapshotRecord&) = default;
};

/// Parses every line of a JSONL file.
inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<SnapshotRecord> read_snapshot_records(const std::filesystem::path& path) {
  std::vector<SnapshotRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(SnapshotRecord::from_json(j));
  return out;
}

}  // namespace bbm::harness
