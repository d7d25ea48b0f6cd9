#pragma once

// Page geometry: where every (list, position) slot sits on an integer grid, and
// the Manhattan distance matrix over the flattened n*m slots.

#include <cstddef>
#include <string>
#include <vector>

namespace par {

enum class Orientation { vertical, horizontal };

struct GridCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

class PageLayout {
 public:
  /// `coords[i]` holds the real slots of list i, in display order.
  /// `roles` are short list labels used in metric columns (e.g. "v", "h1").
  PageLayout(std::vector<std::vector<GridCoord>> coords, std::vector<Orientation> orientations,
             std::vector<std::string> roles);

  std::size_t num_lists() const { return coords_.size(); }
  /// Padded maximum list length m.
  std::size_t max_len() const { return max_len_; }
  std::size_t list_len(std::size_t list) const { return coords_.at(list).size(); }
  std::size_t num_slots() const { return num_lists() * max_len_; }

  /// Coordinate of a slot. Padding positions (>= list_len) report the list's
  /// last real slot.
  GridCoord coord(std::size_t list, std::size_t pos) const;
  bool is_real(std::size_t list, std::size_t pos) const { return pos < list_len(list); }
  Orientation orientation(std::size_t list) const { return orientations_.at(list); }
  const std::string& role(std::size_t list) const { return roles_.at(list); }
  const std::vector<std::string>& roles() const { return roles_; }

  /// Same page with lists reordered: list i of the result is list order[i] here.
  PageLayout permuted(const std::vector<std::size_t>& order) const;

 private:
  std::vector<std::vector<GridCoord>> coords_;
  std::vector<Orientation> orientations_;
  std::vector<std::string> roles_;
  std::size_t max_len_ = 0;
};

/// Symmetric nm x nm matrix of Manhattan steps over slots p = i*m + j.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  DistanceMatrix(std::size_t size, std::vector<int> entries);

  std::size_t size() const { return size_; }
  int at(std::size_t p, std::size_t q) const { return entries_[p * size_ + q]; }
  const std::vector<int>& entries() const { return entries_; }
  std::vector<double> as_doubles() const;

 private:
  std::size_t size_ = 0;
  std::vector<int> entries_;
};

DistanceMatrix manhattan_distance_matrix(const PageLayout& layout);

/// One vertical list on the left with `h_count` horizontal carousels beside it.
/// Vertical item j sits at (j, 0); horizontal list i item j at (4i, j + 1), so
/// three vertical items separate consecutive horizontal lists.
/// List 0 is the vertical list ("v"), lists 1..h_count are "h1".."hK".
PageLayout fshape_preset(std::size_t v_len, std::size_t h_count, std::size_t h_len);

/// n horizontal lists of m items stacked top to bottom: list i item j at (i, j).
PageLayout stacked_preset(std::size_t n, std::size_t m);

}  // namespace par
