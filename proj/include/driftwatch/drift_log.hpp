#pragma once

// Append-only drift log: one record per inference with device metadata and
// the on-device drift verdict.
//
// Persistence is newline-delimited JSON. The first line is a header carrying
// the attribute schema; each subsequent line is one entry. See
// docs/formats.md for the record layout.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "driftwatch/itemset.hpp"

namespace driftwatch {

struct DriftLogEntry {
  std::int64_t timestamp = 0;  // epoch seconds
  std::string device_id;
  std::string model_version_id;
  AttributeMap attributes;
  bool drift = false;

  bool operator==(const DriftLogEntry&) const = default;
};

// The fixed set of attribute names every entry must carry.
struct Schema {
  std::vector<std::string> attributes;

  // Throws SchemaError naming the first missing or undeclared attribute.
  void validate(const DriftLogEntry& entry) const;
  bool operator==(const Schema&) const = default;
};

// Entries with timestamp in [start, end), in insertion order.
struct LogWindow {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::vector<DriftLogEntry> entries;
};

enum class DriftFilter { any, drifted, clean };

// Number of entries containing every pair of `itemset`, restricted by flag.
std::size_t count(std::span<const DriftLogEntry> entries, const Itemset& itemset,
                  DriftFilter filter = DriftFilter::any);
inline std::size_t count(const LogWindow& w, const Itemset& itemset,
                         DriftFilter filter = DriftFilter::any) {
  return count(w.entries, itemset, filter);
}

// Mutable view over a window whose drift flags can be cleared without
// touching the source. Attribute-value pairs are interned to dense ids so
// matching an itemset against an entry is a short integer scan. Single owner;
// not thread-safe. Copies share the immutable entry data.
class WorkingCopy {
 public:
  using ItemId = std::uint32_t;

  explicit WorkingCopy(const LogWindow& window);

  std::size_t size() const noexcept { return flags_.size(); }
  const DriftLogEntry& entry(std::size_t i) const;
  bool drift(std::size_t i) const { return flags_[i] != 0; }
  std::size_t drifted_count() const noexcept { return drifted_; }

  // Clears the drift flag on every entry matching itemset. Returns how many
  // flags changed.
  std::size_t mark_no_drift(const Itemset& itemset);
  std::size_t count(const Itemset& itemset, DriftFilter filter = DriftFilter::any) const;

  // Interned view. encode() returns std::nullopt when some pair never occurs
  // in the window (the itemset then matches nothing).
  std::size_t item_count() const noexcept;
  const Item& item(ItemId id) const;
  std::span<const ItemId> entry_items(std::size_t i) const;
  std::optional<std::vector<ItemId>> encode(const Itemset& itemset) const;
  bool matches(std::size_t i, std::span<const ItemId> sorted_ids) const;

  // (matched, matched and drifted) under the current flags.
  std::pair<std::size_t, std::size_t> match_counts(const Itemset& itemset) const;

 private:
  struct Data;
  std::shared_ptr<const Data> data_;
  std::vector<char> flags_;
  std::size_t drifted_ = 0;
};

// Thread-safe append-only store. Appends are atomic per record; readers see a
// consistent prefix.
class DriftLog {
 public:
  // In-memory log.
  explicit DriftLog(Schema schema);
  // Durable log at `path`. An existing file is replayed; its schema must
  // equal `schema`.
  DriftLog(Schema schema, std::filesystem::path path);
  // Reopens an existing file, taking the schema from its header.
  static std::unique_ptr<DriftLog> open(const std::filesystem::path& path);

  DriftLog(const DriftLog&) = delete;
  DriftLog& operator=(const DriftLog&) = delete;

  // Returns the zero-based entry id. Throws SchemaError on a schema mismatch
  // and InvalidInput if the device's timestamp goes backwards.
  std::uint64_t append(const DriftLogEntry& entry);

  // Throws InvalidInput when start >= end.
  LogWindow window(std::int64_t start, std::int64_t end) const;
  std::vector<DriftLogEntry> entries() const;

  std::size_t size() const;
  const Schema& schema() const noexcept { return schema_; }
  const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

 private:
  void replay();

  Schema schema_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
  mutable std::shared_mutex mu_;
  std::vector<DriftLogEntry> entries_;
  std::unordered_map<std::string, std::int64_t> last_ts_;
};

}  // namespace driftwatch
