#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctc {

inline constexpr std::size_t kMaxDepth = 4;
inline constexpr std::string_view kPathSeparator = " > ";

// A taxonomy path of 1..4 levels, e.g. "Apparel > Shirts > T-Shirts".
class CategoryPath {
 public:
  CategoryPath() = default;

  // Validates the invariants; throws MalformedPathError.
  explicit CategoryPath(std::vector<std::string> levels);

  const std::vector<std::string>& levels() const noexcept { return levels_; }
  std::size_t depth() const noexcept { return levels_.size(); }
  bool empty() const noexcept { return levels_.empty(); }
  const std::string& level(std::size_t i) const { return levels_.at(i - 1); }

  // Canonical " > " join.
  std::string render() const;

  friend bool operator==(const CategoryPath&, const CategoryPath&) = default;
  friend auto operator<=>(const CategoryPath&, const CategoryPath&) = default;

 private:
  std::vector<std::string> levels_;
};

// Splits on " > ", trims each segment. Throws MalformedPathError naming the
// 1-based offending segment.
CategoryPath parse_path(std::string_view text);

// First `level` levels. Throws RangeError unless 1 <= level <= depth.
CategoryPath truncate(const CategoryPath& path, std::size_t level);

// truncate(p, level) == truncate(q, level). Throws RangeError if level
// exceeds either depth or is 0.
bool agrees_to_level(const CategoryPath& p, const CategoryPath& q, std::size_t level);

// Per-level dense label ids. Level i's ids enumerate the distinct length-i
// truncations sorted by rendered text. Immutable after construction.
class Taxonomy {
 public:
  Taxonomy() = default;
  explicit Taxonomy(const std::vector<CategoryPath>& observed);

  std::size_t max_depth() const noexcept { return by_level_.size(); }

  // Number of distinct labels c_i at `level` (1-based).
  std::size_t num_labels(std::size_t level) const;

  const std::vector<CategoryPath>& labels(std::size_t level) const;

  // id of a path of depth == level; nullopt if unseen.
  std::optional<std::size_t> id_of(const CategoryPath& path) const;

  // All stored paths (every prefix of every observed path), sorted.
  std::vector<CategoryPath> paths() const;

  bool contains(const CategoryPath& path) const { return id_of(path).has_value(); }

 private:
  std::vector<std::vector<CategoryPath>> by_level_;
  std::vector<std::vector<std::string>> rendered_;
};

}  // namespace ctc
