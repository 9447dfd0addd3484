#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace testsupport {

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central finite differences against analytic gradients. `params` point into
// live storage that the loss closure reads; entries are restored after probing.
inline FdReport fd_compare(const std::vector<double*>& params,
                           const std::vector<double>& analytic,
                           const std::function<double()>& loss, double step = 1e-6) {
  FdReport rep;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& x = *params[i];
    const double saved = x;
    const double h = step * std::max(1.0, std::abs(saved));
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = i;
      rep.analytic = analytic[i];
      rep.numeric = numeric;
    }
  }
  return rep;
}

}  // namespace testsupport
