// SPDX-License-Identifier: Apache-2.0
#include "dta/metrics.hpp"

#include <cmath>

#include <json.hpp>

#include "dta/errors.hpp"

namespace dta {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw DataError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()) + ")");
}

}  // namespace

CiResult concordance_index(std::span<const double> predictions,
                           std::span<const double> affinities) {
  check_lengths(predictions, affinities, "concordance_index");
  const size_t n = affinities.size();
  if (n < 2) throw DataError("concordance_index: need at least 2 samples");
  double score = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (!(affinities[i] > affinities[j])) continue;
      ++pairs;
      const double d = predictions[i] - predictions[j];
      if (d > 0.0)
        score += 1.0;
      else if (d == 0.0)
        score += 0.5;
    }
  }
  if (pairs == 0) throw DataError("concordance_index: no comparable pairs");
  return {score / static_cast<double>(pairs), pairs};
}

R2mResult r_squared_m(std::span<const double> predictions,
                      std::span<const double> affinities) {
  check_lengths(predictions, affinities, "r_squared_m");
  const size_t n = affinities.size();
  if (n < 3) throw DataError("r_squared_m: need at least 3 samples");
  double fbar = 0.0, ybar = 0.0;
  for (size_t i = 0; i < n; ++i) {
    fbar += predictions[i];
    ybar += affinities[i];
  }
  fbar /= static_cast<double>(n);
  ybar /= static_cast<double>(n);
  double sff = 0.0, syy = 0.0, sfy = 0.0, sf2 = 0.0, syf = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double df = predictions[i] - fbar;
    const double dy = affinities[i] - ybar;
    sff += df * df;
    syy += dy * dy;
    sfy += df * dy;
    sf2 += predictions[i] * predictions[i];
    syf += affinities[i] * predictions[i];
  }
  if (sff == 0.0 || syy == 0.0) throw DataError("r_squared_m: zero variance input");
  R2mResult r;
  r.r2 = (sfy * sfy) / (sff * syy);
  const double k = syf / sf2;
  double sres = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double e = affinities[i] - k * predictions[i];
    sres += e * e;
  }
  r.r20 = 1.0 - sres / syy;
  double diff = r.r2 - r.r20;
  if (diff < 0.0) {
    diff = 0.0;
    r.clamped = true;
  }
  r.r2m = r.r2 * (1.0 - std::sqrt(diff));
  return r;
}

double mse_metric(std::span<const double> predictions,
                  std::span<const double> affinities) {
  check_lengths(predictions, affinities, "mse_metric");
  const size_t n = affinities.size();
  if (n == 0) throw DataError("mse_metric: empty input");
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = predictions[i] - affinities[i];
    s += d * d;
  }
  return s / static_cast<double>(n);
}

MetricsReport compute_metrics(std::span<const double> predictions,
                              std::span<const double> affinities,
                              std::string config_digest) {
  MetricsReport rep;
  rep.mse = mse_metric(predictions, affinities);
  const CiResult ci = concordance_index(predictions, affinities);
  rep.ci = ci.ci;
  rep.comparable_pairs = ci.comparable_pairs;
  const R2mResult r = r_squared_m(predictions, affinities);
  rep.r2m = r.r2m;
  rep.r2m_clamped = r.clamped;
  rep.n = static_cast<int64_t>(affinities.size());
  rep.config_digest = std::move(config_digest);
  return rep;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["mse"] = report.mse;
  j["ci"] = report.ci;
  j["r2m"] = report.r2m;
  j["n"] = report.n;
  j["comparable_pairs"] = report.comparable_pairs;
  j["r2m_clamped"] = report.r2m_clamped;
  j["config_digest"] = report.config_digest;
  return j.dump(2);
}

}  // namespace dta
