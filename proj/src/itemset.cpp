#include "driftwatch/itemset.hpp"

#include <algorithm>

#include "driftwatch/errors.hpp"

namespace driftwatch {

Itemset::Itemset(std::vector<Item> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end());
  items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
}

Itemset::Itemset(std::initializer_list<Item> items)
    : Itemset(std::vector<Item>(items)) {}

Itemset Itemset::from_map(const AttributeMap& attrs) {
  std::vector<Item> items;
  items.reserve(attrs.size());
  for (const auto& [k, v] : attrs) items.push_back({k, v});
  return Itemset(std::move(items));
}

bool Itemset::matches(const AttributeMap& attrs) const {
  for (const auto& item : items_) {
    auto it = attrs.find(item.attribute);
    if (it == attrs.end() || it->second != item.value) return false;
  }
  return true;
}

bool Itemset::subset_of(const Itemset& other) const {
  return std::includes(other.items_.begin(), other.items_.end(), items_.begin(),
                       items_.end());
}

bool Itemset::strict_subset_of(const Itemset& other) const {
  return items_.size() < other.items_.size() && subset_of(other);
}

std::string Itemset::to_string() const {
  if (items_.empty()) return "{}";
  std::string out;
  for (const auto& item : items_) {
    if (!out.empty()) out += ',';
    out += item.attribute;
    out += '=';
    out += item.value;
  }
  return out;
}

Itemset Itemset::parse(const std::string& text) {
  if (text.empty() || text == "{}") return {};
  std::vector<Item> items;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string part = text.substr(pos, comma - pos);
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InvalidInput("malformed itemset term '" + part + "'");
    }
    items.push_back({part.substr(0, eq), part.substr(eq + 1)});
    pos = comma + 1;
  }
  return Itemset(std::move(items));
}

}  // namespace driftwatch
