// SPDX-License-Identifier: Apache-2.0
//
// Central-difference verification of analytic gradients. Double precision
// only: the probe step is sized against double rounding, and float would
// drown the signal in truncation noise.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dta {

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int64_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;

  double max_rel_err() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.max_rel_err);
    return m;
  }
  bool ok(double tol) const { return max_rel_err() <= tol; }
};

// Perturbs `params` in place, one coordinate at a time, and compares the
// central difference of `loss` against `analytic`. `loss` must recompute
// the full forward pass from the current parameter contents on each call,
// and `params` is restored bitwise before returning. `stride` subsamples
// coordinates for large groups; relative error is scaled by
// max(1, |analytic|, |numeric|).
inline GradCheckGroup finite_diff_group(std::string name, std::span<double> params,
                                        std::span<const double> analytic,
                                        const std::function<double()>& loss, int stride = 1) {
  GradCheckGroup g;
  g.name = std::move(name);
  if (stride < 1) stride = 1;
  for (size_t i = 0; i < params.size(); i += static_cast<size_t>(stride)) {
    const double p0 = params[i];
    const double h = 1e-5 * std::max(1.0, std::fabs(p0));
    params[i] = p0 + h;
    const double fp = loss();
    params[i] = p0 - h;
    const double fm = loss();
    params[i] = p0;
    const double num = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double abs_err = std::fabs(a - num);
    const double rel = abs_err / std::max({1.0, std::fabs(a), std::fabs(num)});
    g.max_abs_err = std::max(g.max_abs_err, abs_err);
    g.max_rel_err = std::max(g.max_rel_err, rel);
    ++g.checked;
  }
  return g;
}

}  // namespace dta
