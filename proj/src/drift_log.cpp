#include "driftwatch/drift_log.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <set>

#include "driftwatch/errors.hpp"
#include "driftwatch/serialization.hpp"

namespace driftwatch {

namespace {

constexpr const char* kFormatName = "driftwatch.driftlog";
constexpr int kFormatVersion = 1;

bool passes_filter(bool drift, DriftFilter filter) {
  switch (filter) {
    case DriftFilter::any:
      return true;
    case DriftFilter::drifted:
      return drift;
    case DriftFilter::clean:
      return !drift;
  }
  return false;
}

nlohmann::json header_json(const Schema& schema) {
  return {{"format", kFormatName}, {"version", kFormatVersion}, {"schema", schema.attributes}};
}

Schema read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("drift log " + path.string() + " is empty");
  nlohmann::json h = nlohmann::json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.is_object() || h.value("format", "") != kFormatName) {
    throw InvalidInput("drift log " + path.string() + " has no valid header");
  }
  if (h.value("version", 0) != kFormatVersion) {
    throw InvalidInput("unsupported drift log version in " + path.string());
  }
  return Schema{h.at("schema").get<std::vector<std::string>>()};
}

}  // namespace

void Schema::validate(const DriftLogEntry& entry) const {
  if (entry.device_id.empty()) throw SchemaError("device_id", "entry has empty device_id");
  for (const auto& name : attributes) {
    auto it = entry.attributes.find(name);
    if (it == entry.attributes.end()) {
      throw SchemaError(name, "entry is missing attribute '" + name + "'");
    }
    if (it->second.empty()) {
      throw SchemaError(name, "attribute '" + name + "' has an empty value");
    }
  }
  if (entry.attributes.size() != attributes.size()) {
    const std::set<std::string> declared(attributes.begin(), attributes.end());
    for (const auto& [name, value] : entry.attributes) {
      if (!declared.count(name)) {
        throw SchemaError(name, "attribute '" + name + "' is not in the schema");
      }
    }
  }
}

std::size_t count(std::span<const DriftLogEntry> entries, const Itemset& itemset,
                  DriftFilter filter) {
  std::size_t n = 0;
  for (const auto& e : entries) {
    if (passes_filter(e.drift, filter) && itemset.matches(e.attributes)) ++n;
  }
  return n;
}

struct WorkingCopy::Data {
  std::vector<DriftLogEntry> entries;
  std::vector<Item> items;
  std::map<Item, ItemId> ids;
  // Sorted ids of entry i live in flat[offsets[i] .. offsets[i + 1]).
  std::vector<ItemId> flat;
  std::vector<std::size_t> offsets;
};

WorkingCopy::WorkingCopy(const LogWindow& window) {
  auto data = std::make_shared<Data>();
  data->entries = window.entries;
  data->offsets.reserve(data->entries.size() + 1);
  data->offsets.push_back(0);
  for (const auto& e : data->entries) {
    const std::size_t begin = data->flat.size();
    for (const auto& [attr, value] : e.attributes) {
      Item item{attr, value};
      auto [it, inserted] = data->ids.try_emplace(item, static_cast<ItemId>(data->items.size()));
      if (inserted) data->items.push_back(std::move(item));
      data->flat.push_back(it->second);
    }
    std::sort(data->flat.begin() + static_cast<std::ptrdiff_t>(begin), data->flat.end());
    data->offsets.push_back(data->flat.size());
  }
  flags_.reserve(data->entries.size());
  for (const auto& e : data->entries) {
    flags_.push_back(e.drift ? 1 : 0);
    if (e.drift) ++drifted_;
  }
  data_ = std::move(data);
}

const DriftLogEntry& WorkingCopy::entry(std::size_t i) const { return data_->entries[i]; }
std::size_t WorkingCopy::item_count() const noexcept { return data_->items.size(); }
const Item& WorkingCopy::item(ItemId id) const { return data_->items[id]; }

std::span<const WorkingCopy::ItemId> WorkingCopy::entry_items(std::size_t i) const {
  const auto begin = data_->offsets[i];
  return {data_->flat.data() + begin, data_->offsets[i + 1] - begin};
}

std::optional<std::vector<WorkingCopy::ItemId>> WorkingCopy::encode(
    const Itemset& itemset) const {
  std::vector<ItemId> ids;
  ids.reserve(itemset.size());
  for (const auto& item : itemset.items()) {
    auto it = data_->ids.find(item);
    if (it == data_->ids.end()) return std::nullopt;
    ids.push_back(it->second);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

bool WorkingCopy::matches(std::size_t i, std::span<const ItemId> sorted_ids) const {
  const auto row = entry_items(i);
  return std::includes(row.begin(), row.end(), sorted_ids.begin(), sorted_ids.end());
}

std::size_t WorkingCopy::mark_no_drift(const Itemset& itemset) {
  const auto ids = encode(itemset);
  if (!ids) return 0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < flags_.size(); ++i) {
    if (flags_[i] && matches(i, *ids)) {
      flags_[i] = 0;
      ++changed;
    }
  }
  drifted_ -= changed;
  return changed;
}

std::pair<std::size_t, std::size_t> WorkingCopy::match_counts(const Itemset& itemset) const {
  const auto ids = encode(itemset);
  if (!ids) return {0, 0};
  std::size_t matched = 0;
  std::size_t drifted = 0;
  for (std::size_t i = 0; i < flags_.size(); ++i) {
    if (matches(i, *ids)) {
      ++matched;
      if (flags_[i]) ++drifted;
    }
  }
  return {matched, drifted};
}

std::size_t WorkingCopy::count(const Itemset& itemset, DriftFilter filter) const {
  const auto [matched, drifted] = match_counts(itemset);
  switch (filter) {
    case DriftFilter::any:
      return matched;
    case DriftFilter::drifted:
      return drifted;
    case DriftFilter::clean:
      return matched - drifted;
  }
  return 0;
}

DriftLog::DriftLog(Schema schema) : schema_(std::move(schema)) {}

DriftLog::DriftLog(Schema schema, std::filesystem::path path)
    : schema_(std::move(schema)), path_(std::move(path)) {
  if (std::filesystem::exists(*path_) && std::filesystem::file_size(*path_) > 0) {
    replay();
  } else {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream init(*path_, std::ios::trunc);
    init << header_json(schema_).dump() << '\n';
    if (!init) throw InvalidInput("cannot create drift log at " + path_->string());
  }
  bool ends_with_newline = true;
  {
    std::ifstream tail(*path_, std::ios::binary | std::ios::ate);
    if (tail.tellg() > 0) {
      tail.seekg(-1, std::ios::end);
      ends_with_newline = tail.get() == '\n';
    }
  }
  out_.open(*path_, std::ios::app);
  if (!out_) throw InvalidInput("cannot open drift log " + path_->string());
  if (!ends_with_newline) out_ << '\n';
}

std::unique_ptr<DriftLog> DriftLog::open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read drift log " + path.string());
  Schema schema = read_header(in, path);
  return std::make_unique<DriftLog>(std::move(schema), path);
}

void DriftLog::replay() {
  std::ifstream in(*path_);
  const Schema on_disk = read_header(in, *path_);
  if (!(on_disk == schema_)) {
    throw ConfigError("drift log " + path_->string() + " was written with a different schema");
  }
  std::string line;
  std::size_t lineno = 1;
  std::streamoff good_end = in.tellg();
  bool torn = false;
  while (std::getline(in, line)) {
    ++lineno;
    const bool at_eof = in.eof();
    nlohmann::json j = line.empty() ? nlohmann::json() : nlohmann::json::parse(line, nullptr, false);
    // A torn final record (crash mid-append) is dropped and truncated away.
    if (at_eof && (j.is_discarded() || line.back() != '}')) {
      torn = true;
      break;
    }
    if (line.empty()) {
      good_end = in.tellg();
      continue;
    }
    if (j.is_discarded()) {
      throw InvalidInput("corrupt drift log record at line " + std::to_string(lineno));
    }
    auto entry = j.get<DriftLogEntry>();
    last_ts_[entry.device_id] = entry.timestamp;
    entries_.push_back(std::move(entry));
    good_end = in.tellg();
  }
  in.close();
  if (torn) std::filesystem::resize_file(*path_, static_cast<std::uintmax_t>(good_end));
}

std::uint64_t DriftLog::append(const DriftLogEntry& entry) {
  schema_.validate(entry);
  std::string line;
  if (path_) line = nlohmann::json(entry).dump() + '\n';

  std::unique_lock lock(mu_);
  auto last = last_ts_.find(entry.device_id);
  if (last != last_ts_.end() && entry.timestamp < last->second) {
    throw InvalidInput("timestamp goes backwards for device '" + entry.device_id + "'");
  }
  if (path_) {
    out_ << line;
    out_.flush();
    if (!out_) throw Error("failed to persist drift log entry");
  }
  last_ts_[entry.device_id] = entry.timestamp;
  entries_.push_back(entry);
  return entries_.size() - 1;
}

LogWindow DriftLog::window(std::int64_t start, std::int64_t end) const {
  if (start >= end) throw InvalidInput("window start must precede end");
  LogWindow w{start, end, {}};
  std::shared_lock lock(mu_);
  for (const auto& e : entries_) {
    if (e.timestamp >= start && e.timestamp < end) w.entries.push_back(e);
  }
  return w;
}

std::vector<DriftLogEntry> DriftLog::entries() const {
  std::shared_lock lock(mu_);
  return entries_;
}

std::size_t DriftLog::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

}  // namespace driftwatch
