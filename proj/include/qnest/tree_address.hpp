#pragma once

#include <string>
#include <vector>

#include "qnest/errors.hpp"

namespace qnest {

// Finite sequence of nonzero branch indices.
class TreeAddress {
 public:
  TreeAddress() = default;
  explicit TreeAddress(std::vector<long> entries) : entries_(std::move(entries)) {
    for (long e : entries_) {
      if (e == 0) throw Error(ErrorKind::InvalidAddress, "address entry 0");
    }
  }

  const std::vector<long>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  long operator[](std::size_t i) const { return entries_[i]; }

  void push_back(long e) {
    if (e == 0) throw Error(ErrorKind::InvalidAddress, "address entry 0");
    entries_.push_back(e);
  }

  // drops the last entry
  TreeAddress sigma_plus() const {
    if (empty()) throw Error(ErrorKind::InvalidAddress, "sigma+ of the empty address");
    return TreeAddress(std::vector<long>(entries_.begin(), entries_.end() - 1));
  }
  // drops the first entry
  TreeAddress sigma_minus() const {
    if (empty()) throw Error(ErrorKind::InvalidAddress, "sigma- of the empty address");
    return TreeAddress(std::vector<long>(entries_.begin() + 1, entries_.end()));
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(entries_[i]);
    }
    return s + ")";
  }

  friend bool operator==(const TreeAddress&, const TreeAddress&) = default;
  friend auto operator<=>(const TreeAddress&, const TreeAddress&) = default;

 private:
  std::vector<long> entries_;
};

}  // namespace qnest
