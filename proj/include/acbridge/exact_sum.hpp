#pragma once

#include <span>
#include <vector>

namespace acbridge {

/// Error-free accumulator over doubles (Shewchuk partials, as in Python's fsum).
///
/// The running value is exact, so adding and later subtracting terms leaves no
/// residue, and value() is the correctly rounded sum. A sliding window updated
/// incrementally therefore reads bit-identical to a fresh sum over the window.
class ExactSum {
 public:
  void add(double x);
  void subtract(double x) { add(-x); }
  double value() const;
  void clear() { partials_.clear(); }

  static double sum(std::span<const double> xs);

 private:
  std::vector<double> partials_;
};

}  // namespace acbridge
