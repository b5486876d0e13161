#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

namespace driftwatch {

// attribute name -> categorical value, e.g. {"weather": "snow"}.
using AttributeMap = std::map<std::string, std::string>;

struct Item {
  std::string attribute;
  std::string value;

  auto operator<=>(const Item&) const = default;
};

// A set of attribute-value pairs, kept sorted and unique. An itemset carrying
// two values for the same attribute is legal but matches no entry.
class Itemset {
 public:
  Itemset() = default;
  explicit Itemset(std::vector<Item> items);
  Itemset(std::initializer_list<Item> items);
  static Itemset from_map(const AttributeMap& attrs);

  const std::vector<Item>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }

  // True when every pair of this itemset appears in attrs.
  bool matches(const AttributeMap& attrs) const;
  // Set inclusion (this ⊆ other / this ⊂ other).
  bool subset_of(const Itemset& other) const;
  bool strict_subset_of(const Itemset& other) const;

  // "location=New York,weather=snow"; "{}" for the empty set.
  std::string to_string() const;
  static Itemset parse(const std::string& text);

  auto operator<=>(const Itemset&) const = default;

 private:
  std::vector<Item> items_;
};

}  // namespace driftwatch
