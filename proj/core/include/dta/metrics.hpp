// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace dta {

struct CiResult {
  double ci = 0.0;
  // Ordered pairs (i, j) with affinity_i > affinity_j; affinity ties are
  // not comparable and are excluded from the count.
  int64_t comparable_pairs = 0;
};

// Fraction of comparable pairs whose predicted ordering matches the
// measured ordering, with prediction ties scoring 0.5. Throws DataError
// when lengths differ, n < 2, or no comparable pair exists.
CiResult concordance_index(std::span<const double> predictions,
                           std::span<const double> affinities);

struct R2mResult {
  double r2m = 0.0;
  double r2 = 0.0;   // squared Pearson correlation
  double r20 = 0.0;  // coefficient of determination of the through-origin fit
  // True when r2 - r20 came out negative from rounding and was clamped
  // to 0 before the square root.
  bool clamped = false;
};

// r2m = r2 * (1 - sqrt(max(0, r2 - r20))). The through-origin fit
// regresses affinities on predictions with slope sum(y*f)/sum(f*f) and
// scores it against the variance about the affinity mean. Throws
// DataError when lengths differ, n < 3, or either vector has zero
// variance.
R2mResult r_squared_m(std::span<const double> predictions,
                      std::span<const double> affinities);

// Mean squared difference. Throws DataError when lengths differ or n = 0.
double mse_metric(std::span<const double> predictions,
                  std::span<const double> affinities);

struct MetricsReport {
  double mse = 0.0;
  double ci = 0.0;
  double r2m = 0.0;
  int64_t n = 0;
  int64_t comparable_pairs = 0;
  bool r2m_clamped = false;
  std::string config_digest;
};

MetricsReport compute_metrics(std::span<const double> predictions,
                              std::span<const double> affinities,
                              std::string config_digest);

// One JSON object per evaluation: metric names, values, counts, digest.
std::string to_json(const MetricsReport& report);

}  // namespace dta
