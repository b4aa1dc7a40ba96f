#pragma once

// Brute-force references used by the unit and acceptance tests. They share no
// code with the library beyond the Real type.

#include <cmath>
#include <optional>
#include <vector>

#include "qnest/real.hpp"

namespace oracle {

using qnest::Real;

struct Block {
  double lo, hi;  // grid coordinates of the first and last member
  int time;
  std::vector<int> itinerary;
};

// First return time to (-p, p) with the sign itinerary, double precision.
inline std::optional<int> first_return(double a, double p, double x, int T, std::vector<int>* it) {
  if (it) it->clear();
  double y = x;
  for (int k = 1; k <= T; ++k) {
    if (it) it->push_back(y >= 0 ? 1 : -1);
    y = a - y * y;
    if (std::fabs(y) < p) return k;
  }
  return std::nullopt;
}

// Groups grid points of (-p, p) into maximal runs with the same return time
// and itinerary. Runs touching 0 from both sides are the central branch.
inline std::vector<Block> grid_scan(double a, double p, int T, long N) {
  std::vector<Block> out;
  std::vector<int> it;
  for (long i = 0; i < N; ++i) {
    const double x = -p + 2 * p * (i + 0.5) / N;
    auto r = first_return(a, p, x, T, &it);
    if (!r) continue;
    if (!out.empty() && out.back().time == *r && out.back().itinerary == it) {
      const double prev = -p + 2 * p * (i - 0.5) / N;
      if (out.back().hi == prev) {
        out.back().hi = x;
        continue;
      }
    }
    out.push_back({x, x, *r, it});
  }
  return out;
}

// Same predicate at high precision.
inline bool in_block(const Real& a, const Real& p, const Real& x, const Block& b) {
  Real y = x;
  for (int k = 1; k <= b.time; ++k) {
    if ((y.sign() >= 0 ? 1 : -1) != b.itinerary[k - 1]) return false;
    y = a - y * y;
    const bool inside = qnest::abs(y) < p;
    if (inside != (k == b.time)) return false;
  }
  return true;
}

// Bisects between a member `in` and a non-member `out` of the block.
inline Real refine_edge(const Real& a, const Real& p, Real in, Real out, const Block& b, int steps) {
  for (int s = 0; s < steps; ++s) {
    Real mid = (in + out) / 2L;
    if (in_block(a, p, mid, b)) in = mid; else out = mid;
  }
  return (in + out) / 2L;
}

struct RefinedBlock {
  Real lo, hi;
  int time;
};

inline std::vector<RefinedBlock> refine(const Real& a, const Real& p, const std::vector<Block>& blocks,
                                        long N, int steps = 160) {
  const mpfr_prec_t prec = a.precision();
  const double pd = p.to_double();
  const double h = 2 * pd / N;
  std::vector<RefinedBlock> out;
  for (const Block& b : blocks) {
    Real lo_in(b.lo, prec), hi_in(b.hi, prec);
    Real lo_out(b.lo - h, prec), hi_out(b.hi + h, prec);
    if (lo_out < -p) lo_out = -p;
    if (hi_out > p) hi_out = p;
    Real lo = refine_edge(a, p, lo_in, lo_out, b, steps);
    Real hi = refine_edge(a, p, hi_in, hi_out, b, steps);
    out.push_back({lo, hi, b.time});
  }
  return out;
}

}  // namespace oracle
