#pragma once

// Per-inference and per-batch drift detection over classifier outputs.
//
// All functions are pure and safe to call concurrently.

#include <cstdint>
#include <span>
#include <vector>

namespace driftwatch::detect {

inline constexpr double kDefaultMspThreshold = 0.9;
inline constexpr double kDefaultKsSignificance = 0.05;

// Numerically stable softmax (max-subtracted). Throws InvalidInput for fewer
// than two classes or non-finite logits.
std::vector<double> softmax(std::span<const double> logits);

// Maximum softmax probability, in [1/K, 1].
double msp_score(std::span<const double> logits);

// Alternative confidence scores. Higher means more in-distribution for all
// three, so the same "score < threshold => drift" rule applies.
enum class ScoreKind { msp, entropy, energy };

// 1 - H(p)/ln K, in [0, 1].
double normalized_entropy_confidence(std::span<const double> logits);
// log-sum-exp of the logits (negative free energy); unbounded.
double energy_confidence(std::span<const double> logits);
double confidence_score(ScoreKind kind, std::span<const double> logits);

struct DetectionVerdict {
  bool drift = false;
  double msp = 0.0;
};

// drift = msp < threshold (strict). Throws ConfigError unless 0 < threshold < 1.
DetectionVerdict detect_msp(std::span<const double> logits,
                            double threshold = kDefaultMspThreshold);

// Two-sample Kolmogorov-Smirnov statistic: sup_x |F_a(x) - F_b(x)|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

// Asymptotic critical value c(alpha) * sqrt((n + m) / (n m)) with
// c(alpha) = sqrt(-ln(alpha / 2) / 2).
double ks_critical_value(std::size_t n, std::size_t m, double significance);

// One verdict for the whole batch. Throws ConfigError on an empty reference
// and InvalidInput on an empty batch.
bool detect_ks(std::span<const double> batch_scores,
               std::span<const double> reference_scores,
               double significance = kDefaultKsSignificance);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
};

// 2 TP / (2 TP + FP + FN). Throws UndefinedScore when the denominator is 0.
double f1(const ConfusionCounts& counts);

}  // namespace driftwatch::detect
