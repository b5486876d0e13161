#pragma once

// Unsupervised test-time adaptation of a ToyClassifier's normalization
// parameters. The linear head is never touched.

#include <cstdint>
#include <span>
#include <vector>

#include "driftwatch/toy_model.hpp"

namespace driftwatch::adapt {

using toy::Features;
using toy::ToyClassifier;

struct AdaptConfig {
  int steps = 10;
  double learning_rate = 0.1;
  // Minimum number of inputs an adaptation round needs. Every step uses the
  // whole batch it is given.
  int batch_size = 32;
  int augmentations = 8;          // MEMO only
  double augmentation_std = 0.5;  // MEMO only; 0 makes augmentations identities
  std::uint64_t seed = 0;
  // Before descending, reset (gamma, beta) so the batch is standardized per
  // feature, as batch-norm layers do with test-batch statistics. Assumes the
  // head was trained on standardized features, which train_clean guarantees.
  bool renormalize = false;

  // Throws ConfigError when out of range.
  void validate() const;
};

// Shannon entropy in nats, 0 log 0 = 0. Throws InvalidInput when p is not a
// probability vector (tolerance 1e-6 on the sum).
double entropy(std::span<const double> p);

// Mean prediction entropy over the batch. Throws ConfigError for fewer than
// two inputs.
double tent_loss(const ToyClassifier& model, std::span<const Features> batch);

struct NormGradient {
  std::vector<double> gamma;
  std::vector<double> beta;
};

// Analytic gradient of tent_loss with respect to gamma and beta.
NormGradient grad_tent(const ToyClassifier& model, std::span<const Features> batch);

struct AdaptResult {
  ToyClassifier model;
  double loss_before = 0.0;
  double loss_after = 0.0;
  int steps_run = 0;
  int lr_halvings = 0;
};

// (gamma, beta) that standardize the batch feature-wise. Near-constant
// features keep a scale no larger than 1000x the model's current one.
toy::ToyClassifier renormalized(const ToyClassifier& model, std::span<const Features> batch);

// Gradient descent on tent_loss. Returns the best parameters seen, so without
// renormalize loss_after <= loss_before. A non-finite loss throws AdaptationError;
// the input model is never modified.
AdaptResult adapt_tent(const ToyClassifier& model, std::span<const Features> batch,
                       const AdaptConfig& config = {});

// Seeded noise-augmented copies of each input, drawn once per call.
std::vector<std::vector<Features>> memo_augmentations(std::span<const Features> batch,
                                                      const AdaptConfig& config);

// Mean over inputs of the entropy of the augmentation-averaged softmax.
double memo_loss(const ToyClassifier& model,
                 const std::vector<std::vector<Features>>& augmented);

// Gradient descent on memo_loss using a central-difference gradient.
AdaptResult adapt_memo(const ToyClassifier& model, std::span<const Features> batch,
                       const AdaptConfig& config = {});

}  // namespace driftwatch::adapt
