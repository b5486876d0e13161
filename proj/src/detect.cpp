#include "driftwatch/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "driftwatch/errors.hpp"

namespace driftwatch::detect {

namespace {

void check_logits(std::span<const double> logits) {
  if (logits.size() < 2) {
    throw InvalidInput("logit vector needs at least two classes");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite logit");
  }
}

double log_sum_exp(std::span<const double> logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double v : logits) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  check_logits(logits);
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

double msp_score(std::span<const double> logits) {
  const auto p = softmax(logits);
  return *std::max_element(p.begin(), p.end());
}

double normalized_entropy_confidence(std::span<const double> logits) {
  const auto p = softmax(logits);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return 1.0 - h / std::log(static_cast<double>(p.size()));
}

double energy_confidence(std::span<const double> logits) {
  check_logits(logits);
  return log_sum_exp(logits);
}

double confidence_score(ScoreKind kind, std::span<const double> logits) {
  switch (kind) {
    case ScoreKind::msp:
      return msp_score(logits);
    case ScoreKind::entropy:
      return normalized_entropy_confidence(logits);
    case ScoreKind::energy:
      return energy_confidence(logits);
  }
  throw ConfigError("unknown score kind");
}

DetectionVerdict detect_msp(std::span<const double> logits, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("MSP threshold must lie in (0, 1)");
  }
  const double msp = msp_score(logits);
  return {msp < threshold, msp};
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidInput("KS test needs non-empty samples");
  std::vector<double> xs(a.begin(), a.end());
  std::vector<double> ys(b.begin(), b.end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());

  const double n = static_cast<double>(xs.size());
  const double m = static_cast<double>(ys.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  // Advance past every copy of the smallest pending value so ties are
  // evaluated with both ECDFs right-continuous at that point.
  while (i < xs.size() && j < ys.size()) {
    const double x = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] == x) ++i;
    while (j < ys.size() && ys[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double ks_critical_value(std::size_t n, std::size_t m, double significance) {
  if (!(significance > 0.0 && significance < 1.0)) {
    throw ConfigError("KS significance must lie in (0, 1)");
  }
  if (n == 0 || m == 0) throw InvalidInput("KS critical value needs n, m >= 1");
  const double c = std::sqrt(-std::log(significance / 2.0) / 2.0);
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  return c * std::sqrt((dn + dm) / (dn * dm));
}

bool detect_ks(std::span<const double> batch_scores,
               std::span<const double> reference_scores, double significance) {
  if (reference_scores.empty()) throw ConfigError("KS reference distribution is empty");
  if (batch_scores.empty()) throw InvalidInput("KS batch is empty");
  const double d = ks_statistic(batch_scores, reference_scores);
  return d > ks_critical_value(batch_scores.size(), reference_scores.size(), significance);
}

double f1(const ConfusionCounts& c) {
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) +
                       static_cast<double>(c.fn);
  if (denom == 0.0) throw UndefinedScore("F1 undefined: no positives predicted or present");
  return 2.0 * static_cast<double>(c.tp) / denom;
}

}  // namespace driftwatch::detect
