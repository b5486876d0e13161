#pragma once

// Small stand-in classifier: per-feature affine normalization, then a linear
// head, then softmax. Only the normalization (gamma, beta) is ever adapted;
// the head is shared and frozen after training.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/itemset.hpp"

namespace driftwatch::toy {

using Features = std::vector<double>;

struct LabeledSample {
  Features x;
  int label = 0;
};

struct TaskConfig {
  int classes = 8;
  int dim = 16;
  int train_per_class = 200;
  int validation_per_class = 100;
  double noise_scale = 1.0;
  // Class means are offset + r_k * u_k with unit u_k and r_k spread linearly
  // over [min_separation, max_separation], so some classes are harder.
  double min_separation = 4.0;
  double max_separation = 6.0;
  double offset_scale = 2.0;
  double l2 = 1e-3;
};

struct SyntheticTask {
  int classes = 0;
  int dim = 0;
  std::vector<Features> means;       // classes x dim
  double noise_scale = 1.0;
  std::vector<double> label_probs;   // sums to 1
  int train_per_class = 200;
  int validation_per_class = 100;
  double l2 = 1e-3;

  // Throws ConfigError when the invariants do not hold.
  void validate() const;
  // Label-weighted mean of the class means.
  Features center() const;
  static SyntheticTask generate(const TaskConfig& config, std::uint64_t seed);
};

Features draw_features(const SyntheticTask& task, int label, std::mt19937_64& rng);
std::vector<LabeledSample> draw_samples(const SyntheticTask& task, int per_class,
                                        std::mt19937_64& rng);

struct LinearHead {
  int dim = 0;
  int classes = 0;
  std::vector<double> weights;  // row-major dim x classes
  std::vector<double> bias;     // classes

  double w(int j, int k) const { return weights[static_cast<std::size_t>(j) * classes + k]; }
};

struct ToyClassifier {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::shared_ptr<const LinearHead> head;
  std::vector<double> clean_msp_reference;

  std::string version_id = "clean";
  std::string parent_version;
  Itemset cause;

  int dim() const { return head ? head->dim : 0; }
  int classes() const { return head ? head->classes : 0; }
  // Copy with (gamma, beta) replaced; shares the frozen head.
  ToyClassifier with_norm(std::vector<double> g, std::vector<double> b) const;
};

struct TrainOptions {
  int max_iterations = 20000;
  double tolerance = 1e-5;  // on the gradient's max-norm
};

struct TrainingReport {
  int iterations = 0;
  double final_loss = 0.0;
  double gradient_norm = 0.0;
  double validation_accuracy = 0.0;
};

// Fits the head by accelerated gradient descent on L2-regularized softmax
// regression over standardized features. Deterministic given seed. Throws
// TrainingError when the iteration cap is hit first.
ToyClassifier train_clean(const SyntheticTask& task, std::uint64_t seed,
                          const TrainOptions& options = {}, TrainingReport* report = nullptr);

// logits = W^T (gamma * x + beta) + b. Throws InvalidInput on dimension mismatch.
std::vector<double> predict(const ToyClassifier& model, std::span<const double> x);
int predict_label(const ToyClassifier& model, std::span<const double> x);

// Fraction of samples whose argmax matches the label. Throws InvalidInput on
// an empty stream.
double accuracy(const ToyClassifier& model, std::span<const LabeledSample> samples);

enum class CorruptionKind { shift, scale, additive_noise, feature_mask, identity };

struct CorruptionSpec {
  std::string cause;
  CorruptionKind kind = CorruptionKind::identity;
  int severity = 0;  // 1..5; 0 means "no corruption"
  // Point that rain's and snow's contrast loss contracts toward (typically
  // the data center); empty means a fixed point derived from the cause name.
  // Fog always uses its own haze point.
  Features anchor;
};

const char* to_string(CorruptionKind kind);

// Weather label -> corruption: rain is contrast loss plus heavy noise on a
// quarter of the coordinates, snow is contrast loss plus masked coordinates,
// fog contracts toward a haze point, clear-day is the identity. A "shift", "scale", "noise" or "mask" prefix selects that kind
// directly. Unknown names throw ConfigError.
CorruptionSpec corruption_for(const std::string& cause, int severity);

// The fixed part of a corruption (direction, haze point, masked coordinates)
// depends only on the cause name and dimension; `seed` drives the per-sample
// noise only. Throws ConfigError for severity outside 0..5.
Features corrupt(std::span<const double> x, const CorruptionSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const ToyClassifier& model);
ToyClassifier classifier_from_json(const nlohmann::json& j);

}  // namespace driftwatch::toy
