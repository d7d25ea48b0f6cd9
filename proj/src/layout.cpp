#include "par/layout.hpp"

#include <cstdlib>
#include <set>
#include <utility>

#include "par/errors.hpp"

namespace par {

PageLayout::PageLayout(std::vector<std::vector<GridCoord>> coords, std::vector<Orientation> orientations,
                       std::vector<std::string> roles)
    : coords_(std::move(coords)), orientations_(std::move(orientations)), roles_(std::move(roles)) {
  if (coords_.empty()) throw ConfigError("layout needs at least one list");
  if (orientations_.size() != coords_.size() || roles_.size() != coords_.size()) {
    throw ConfigError("layout: coords, orientations and roles differ in length");
  }
  std::set<std::pair<int, int>> used;
  for (const auto& list : coords_) {
    if (list.empty()) throw ConfigError("layout: every list needs at least one slot");
    max_len_ = std::max(max_len_, list.size());
    for (const auto& c : list) {
      if (c.row < 0 || c.col < 0) throw ConfigError("layout: negative grid coordinate");
      if (!used.emplace(c.row, c.col).second) {
        throw ConfigError("layout: two slots share coordinate (" + std::to_string(c.row) + "," +
                          std::to_string(c.col) + ")");
      }
    }
  }
}

GridCoord PageLayout::coord(std::size_t list, std::size_t pos) const {
  const auto& l = coords_.at(list);
  if (pos >= max_len_) throw ContractError("layout: position " + std::to_string(pos) + " beyond padded length");
  return pos < l.size() ? l[pos] : l.back();
}

PageLayout PageLayout::permuted(const std::vector<std::size_t>& order) const {
  if (order.size() != num_lists()) throw ContractError("layout permutation has wrong length");
  std::vector<std::vector<GridCoord>> c;
  std::vector<Orientation> o;
  std::vector<std::string> r;
  for (auto i : order) {
    c.push_back(coords_.at(i));
    o.push_back(orientations_.at(i));
    r.push_back(roles_.at(i));
  }
  return PageLayout(std::move(c), std::move(o), std::move(r));
}

DistanceMatrix::DistanceMatrix(std::size_t size, std::vector<int> entries)
    : size_(size), entries_(std::move(entries)) {
  if (entries_.size() != size_ * size_) throw ContractError("distance matrix entry count mismatch");
}

std::vector<double> DistanceMatrix::as_doubles() const { return {entries_.begin(), entries_.end()}; }

DistanceMatrix manhattan_distance_matrix(const PageLayout& layout) {
  const std::size_t n = layout.num_lists(), m = layout.max_len(), nm = n * m;
  std::vector<GridCoord> flat(nm);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) flat[i * m + j] = layout.coord(i, j);
  std::vector<int> d(nm * nm);
  for (std::size_t p = 0; p < nm; ++p)
    for (std::size_t q = 0; q < nm; ++q)
      d[p * nm + q] = std::abs(flat[p].row - flat[q].row) + std::abs(flat[p].col - flat[q].col);
  return DistanceMatrix(nm, std::move(d));
}

PageLayout fshape_preset(std::size_t v_len, std::size_t h_count, std::size_t h_len) {
  if (v_len < h_count) {
    throw ConfigError("fshape: vertical length " + std::to_string(v_len) + " shorter than horizontal list count " +
                      std::to_string(h_count));
  }
  if (v_len == 0 || h_len == 0) throw ConfigError("fshape: list lengths must be positive");
  std::vector<std::vector<GridCoord>> coords;
  std::vector<Orientation> orient;
  std::vector<std::string> roles;
  std::vector<GridCoord> vertical;
  for (std::size_t j = 0; j < v_len; ++j) vertical.push_back({static_cast<int>(j), 0});
  coords.push_back(std::move(vertical));
  orient.push_back(Orientation::vertical);
  roles.emplace_back("v");
  for (std::size_t i = 0; i < h_count; ++i) {
    std::vector<GridCoord> row;
    for (std::size_t j = 0; j < h_len; ++j) row.push_back({static_cast<int>(4 * i), static_cast<int>(j + 1)});
    coords.push_back(std::move(row));
    orient.push_back(Orientation::horizontal);
    roles.push_back("h" + std::to_string(i + 1));
  }
  return PageLayout(std::move(coords), std::move(orient), std::move(roles));
}

PageLayout stacked_preset(std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw ConfigError("stacked: n and m must be positive");
  std::vector<std::vector<GridCoord>> coords(n);
  std::vector<std::string> roles;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) coords[i].push_back({static_cast<int>(i), static_cast<int>(j)});
    roles.push_back("h" + std::to_string(i + 1));
  }
  return PageLayout(std::move(coords), std::vector<Orientation>(n, Orientation::horizontal), std::move(roles));
}

}  // namespace par
