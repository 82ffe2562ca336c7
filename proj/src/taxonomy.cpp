#include "ctc/taxonomy.hpp"

#include <algorithm>
#include <set>

#include "ctc/error.hpp"

namespace ctc {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

CategoryPath::CategoryPath(std::vector<std::string> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw MalformedPathError("path has no levels", 1);
  if (levels_.size() > kMaxDepth) {
    throw MalformedPathError("more than 4 levels", kMaxDepth + 1);
  }
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const std::string& name = levels_[i];
    if (trim(name).empty()) throw MalformedPathError("empty level name", i + 1);
    if (trim(name).size() != name.size()) {
      throw MalformedPathError("level name has surrounding whitespace", i + 1);
    }
    // Padding catches a leading "> " or trailing " >" that would fuse with
    // the separator once rendered.
    if ((" " + name + " ").find(kPathSeparator) != std::string::npos) {
      throw MalformedPathError("level name contains \" > \"", i + 1);
    }
  }
}

std::string CategoryPath::render() const {
  std::string out;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (i) out += kPathSeparator;
    out += levels_[i];
  }
  return out;
}

CategoryPath parse_path(std::string_view text) {
  if (trim(text).empty()) throw MalformedPathError("empty input", 1);
  // A separator is any '>' with a space on both sides; neighbouring
  // separators may share a space ("A > > C" has an empty second segment).
  std::vector<std::string> segments;
  std::size_t start = 0;
  auto push = [&](std::string_view raw) {
    std::string_view seg = trim(raw);
    if (seg.empty()) throw MalformedPathError("empty segment", segments.size() + 1);
    segments.emplace_back(seg);
    if (segments.size() > kMaxDepth) {
      throw MalformedPathError("more than 4 segments", segments.size());
    }
  };
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    if (text[i] == '>' && text[i - 1] == ' ' && text[i + 1] == ' ') {
      push(text.substr(start, i - start));
      start = i + 1;
    }
  }
  push(text.substr(start));
  return CategoryPath(std::move(segments));
}

CategoryPath truncate(const CategoryPath& path, std::size_t level) {
  if (level < 1 || level > path.depth()) {
    throw RangeError("truncate: level " + std::to_string(level) + " outside 1.." +
                     std::to_string(path.depth()));
  }
  if (level == path.depth()) return path;
  return CategoryPath(std::vector<std::string>(path.levels().begin(),
                                               path.levels().begin() + level));
}

bool agrees_to_level(const CategoryPath& p, const CategoryPath& q, std::size_t level) {
  if (level < 1 || level > p.depth() || level > q.depth()) {
    throw RangeError("agrees_to_level: level " + std::to_string(level) +
                     " exceeds path depth");
  }
  return std::equal(p.levels().begin(), p.levels().begin() + level, q.levels().begin());
}

Taxonomy::Taxonomy(const std::vector<CategoryPath>& observed) {
  std::size_t depth = 0;
  for (const auto& p : observed) depth = std::max(depth, p.depth());
  by_level_.resize(depth);
  rendered_.resize(depth);
  for (std::size_t level = 1; level <= depth; ++level) {
    std::set<std::string> seen;
    auto& labels = by_level_[level - 1];
    std::vector<std::pair<std::string, CategoryPath>> keyed;
    for (const auto& p : observed) {
      if (p.depth() < level) continue;
      CategoryPath t = truncate(p, level);
      std::string r = t.render();
      if (seen.insert(r).second) keyed.emplace_back(std::move(r), std::move(t));
    }
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [r, t] : keyed) {
      rendered_[level - 1].push_back(r);
      labels.push_back(std::move(t));
    }
  }
}

std::size_t Taxonomy::num_labels(std::size_t level) const {
  if (level < 1 || level > by_level_.size()) throw RangeError("taxonomy level out of range");
  return by_level_[level - 1].size();
}

const std::vector<CategoryPath>& Taxonomy::labels(std::size_t level) const {
  if (level < 1 || level > by_level_.size()) throw RangeError("taxonomy level out of range");
  return by_level_[level - 1];
}

std::optional<std::size_t> Taxonomy::id_of(const CategoryPath& path) const {
  std::size_t level = path.depth();
  if (level < 1 || level > by_level_.size()) return std::nullopt;
  const auto& keys = rendered_[level - 1];
  std::string r = path.render();
  auto it = std::lower_bound(keys.begin(), keys.end(), r);
  if (it == keys.end() || *it != r) return std::nullopt;
  return static_cast<std::size_t>(it - keys.begin());
}

std::vector<CategoryPath> Taxonomy::paths() const {
  std::vector<CategoryPath> out;
  for (const auto& level : by_level_) out.insert(out.end(), level.begin(), level.end());
  std::sort(out.begin(), out.end(),
            [](const CategoryPath& a, const CategoryPath& b) { return a.render() < b.render(); });
  return out;
}

}  // namespace ctc
