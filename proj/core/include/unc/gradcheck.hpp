#pragma once

#include <functional>
#include <vector>

#include "unc/tensor.hpp"

namespace unc {

struct CheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
  // Leaf index and flat element index of the worst coordinate.
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
};

// Compares reverse-mode gradients of a scalar-valued computation against
// central differences over every element of every leaf. The callable must be
// deterministic (freeze any sampling noise before calling) and must read the
// leaves' current data each time it is evaluated.
CheckReport finite_difference_check(const std::function<Tensor()>& f,
                                    const std::vector<Tensor>& leaves,
                                    double step, double tolerance);

// Single-input convenience: f maps a fresh requires-grad leaf to a scalar.
CheckReport finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                                    const Tensor& x, double step, double tolerance);

}  // namespace unc
