#include "unc/gradcheck.hpp"

#include <cmath>

namespace unc {

CheckReport finite_difference_check(const std::function<Tensor()>& f,
                                    const std::vector<Tensor>& leaves,
                                    double step, double tolerance) {
  if (step <= 0.0) throw ValueError("finite_difference_check: step must be > 0");

  Tensor loss = f();
  GradientMap analytic = backward(loss);

  CheckReport report;
  report.max_rel_error = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const Tensor& leaf = leaves[li];
    std::vector<double> grad(leaf.numel(), 0.0);
    if (analytic.contains(leaf)) {
      auto g = analytic.at(leaf).data();
      grad.assign(g.begin(), g.end());
    }
    auto data = const_cast<Tensor&>(leaf).data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      double up, down;
      {
        NoGradGuard guard;
        data[i] = saved + step;
        up = f().item();
        data[i] = saved - step;
        down = f().item();
        data[i] = saved;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(grad[i] - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_leaf = li;
        report.worst_index = i;
      }
    }
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

CheckReport finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                                    const Tensor& x, double step, double tolerance) {
  Tensor leaf = x.clone(true);
  return finite_difference_check([&]() { return f(leaf); }, {leaf}, step, tolerance);
}

}  // namespace unc
