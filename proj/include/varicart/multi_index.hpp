#pragma once
// Ordered multi-indices of derivative counts, one count per independent
// direction. Addition is component-wise; subtraction is partial and fails when
// any component would become negative.

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace varicart {

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::size_t r) : counts_(r, 0) {}
  MultiIndex(std::initializer_list<int> counts) : counts_(counts) { check_nonnegative(); }
  explicit MultiIndex(std::vector<int> counts) : counts_(std::move(counts)) { check_nonnegative(); }

  /// The unit index 1_k: all components zero except direction k.
  static MultiIndex unit(std::size_t r, std::size_t k) {
    if (k >= r) throw std::invalid_argument("multi-index direction out of range");
    MultiIndex j(r);
    j.counts_[k] = 1;
    return j;
  }

  std::size_t size() const { return counts_.size(); }
  int operator[](std::size_t i) const { return counts_.at(i); }
  const std::vector<int>& counts() const { return counts_; }

  /// Total order #J.
  int order() const {
    int s = 0;
    for (int c : counts_) s += c;
    return s;
  }

  bool is_zero() const { return order() == 0; }

  MultiIndex plus(const MultiIndex& o) const {
    check_same_length(o);
    MultiIndex r = *this;
    for (std::size_t i = 0; i < counts_.size(); ++i) r.counts_[i] += o.counts_[i];
    return r;
  }

  /// Component-wise difference; empty when some component would go negative.
  std::optional<MultiIndex> minus(const MultiIndex& o) const {
    check_same_length(o);
    MultiIndex r = *this;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      r.counts_[i] -= o.counts_[i];
      if (r.counts_[i] < 0) return std::nullopt;
    }
    return r;
  }

  MultiIndex raised(std::size_t dir) const {
    if (dir >= counts_.size()) throw std::invalid_argument("multi-index direction out of range");
    MultiIndex r = *this;
    ++r.counts_[dir];
    return r;
  }

  friend bool operator==(const MultiIndex& a, const MultiIndex& b) { return a.counts_ == b.counts_; }
  friend bool operator!=(const MultiIndex& a, const MultiIndex& b) { return !(a == b); }
  friend bool operator<(const MultiIndex& a, const MultiIndex& b) {
    if (a.counts_.size() != b.counts_.size()) return a.counts_.size() < b.counts_.size();
    if (a.order() != b.order()) return a.order() < b.order();
    return a.counts_ < b.counts_;
  }

  std::string str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(counts_[i]);
    }
    return s + "]";
  }

 private:
  void check_nonnegative() const {
    for (int c : counts_)
      if (c < 0) throw std::invalid_argument("multi-index components must be nonnegative");
  }
  void check_same_length(const MultiIndex& o) const {
    if (counts_.size() != o.counts_.size())
      throw std::invalid_argument("multi-index length mismatch");
  }

  std::vector<int> counts_;
};

inline MultiIndex mi_add(const MultiIndex& a, const MultiIndex& b) { return a.plus(b); }
inline std::optional<MultiIndex> mi_sub(const MultiIndex& a, const MultiIndex& b) { return a.minus(b); }
inline int mi_order(const MultiIndex& j) { return j.order(); }

/// All multi-indices of length r with order <= max_order, in canonical
/// (graded, then lexicographic) order. Mixed indices appear once.
inline std::vector<MultiIndex> all_multi_indices(std::size_t r, int max_order) {
  std::vector<MultiIndex> out;
  std::vector<int> cur(r, 0);
  auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
    if (pos == r) {
      out.push_back(MultiIndex(cur));
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      cur[pos] = c;
      self(self, pos + 1, remaining - c);
      cur[pos] = 0;
    }
  };
  rec(rec, 0, max_order);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace varicart
