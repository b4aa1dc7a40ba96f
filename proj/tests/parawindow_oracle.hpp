#pragma once

// Independent membership test for parameter windows in long double. Central
// boundaries come from marching outward from 0 on the first-entry predicate,
// not from pulling back along itineraries.

#include <cmath>
#include <vector>

namespace pw_oracle {

using LD = long double;

struct Want {
  std::vector<long> v;
  std::vector<int> crit_signs;                 // k = 1..v_n - 1
  std::vector<std::vector<int>> target_signs;  // per target branch, k = 0..r-1
};

inline int sgn(LD x) { return x < 0 ? -1 : 1; }

inline long first_entry(LD g, LD x, LD p, long cap) {
  for (long k = 1; k <= cap; ++k) {
    x = g - x * x;
    if (std::fabs(x) < p) return k;
  }
  return -1;
}

// boundary of the central domain of I = [-p, p] with entry time v
inline LD next_boundary(LD g, LD p, long v) {
  const int steps = 4096;
  const LD h = p / steps;
  LD good = 0;
  int i = 1;
  for (; i < steps; ++i) {
    if (first_entry(g, i * h, p, v) != v) break;
    good = i * h;
  }
  LD bad = i * h;
  for (int it = 0; it < 80; ++it) {
    const LD mid = (good + bad) / 2;
    (first_entry(g, mid, p, v) == v ? good : bad) = mid;
  }
  return good;
}

inline bool member(LD g, const Want& w) {
  if (g <= 0 || g > 2) return false;
  LD p = (std::sqrt(1 + 4 * g) - 1) / 2;
  const int n = static_cast<int>(w.v.size());
  for (int i = 0; i < n; ++i) {
    const long vi = first_entry(g, 0, p, w.v[i] + 1);
    if (vi != w.v[i]) return false;
    if (i + 1 < n) p = next_boundary(g, p, vi);
  }
  LD x = 0;
  const long vn = w.v.back();
  for (long k = 1; k <= vn; ++k) {
    x = g - x * x;
    if (k < vn && sgn(x) != w.crit_signs[k - 1]) return false;
  }
  for (const auto& t : w.target_signs) {
    const long r = static_cast<long>(t.size());
    for (long k = 0; k < r; ++k) {
      if (sgn(x) != t[k]) return false;
      if (k > 0 && std::fabs(x) < p) return false;
      x = g - x * x;
    }
    if (!(std::fabs(x) < p)) return false;
  }
  return true;
}

}  // namespace pw_oracle
