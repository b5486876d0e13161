#include "driftwatch/adapter.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "driftwatch/detect.hpp"
#include "driftwatch/errors.hpp"
#include "driftwatch/hash.hpp"

namespace driftwatch::adapt {

namespace {

constexpr int kPatience = 3;     // consecutive loss increases before halving lr
constexpr int kMaxHalvings = 3;
constexpr double kMemoStep = 1e-5;

double entropy_of_logits(std::span<const double> z, std::vector<double>* p_out = nullptr) {
  const auto p = detect::softmax(z);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  if (p_out) *p_out = p;
  return h;
}

using LossFn = std::function<double(const ToyClassifier&)>;
using GradFn = std::function<NormGradient(const ToyClassifier&)>;

AdaptResult descend(const ToyClassifier& model, const ToyClassifier& start, const AdaptConfig& config,
                    const LossFn& loss_fn, const GradFn& grad_fn) {
  AdaptResult result{start, 0.0, 0.0, 0, 0};
  const double initial = loss_fn(model);
  if (!std::isfinite(initial)) throw AdaptationError("initial adaptation loss is not finite");
  result.loss_before = initial;
  result.loss_after = loss_fn(start);
  if (!std::isfinite(result.loss_after)) throw AdaptationError("renormalized loss is not finite");

  ToyClassifier current = start;
  double lr = config.learning_rate;
  double previous = initial;
  int rising = 0;
  for (int step = 0; step < config.steps; ++step) {
    const auto g = grad_fn(current);
    auto gamma = current.gamma;
    auto beta = current.beta;
    for (std::size_t j = 0; j < gamma.size(); ++j) {
      gamma[j] -= lr * g.gamma[j];
      beta[j] -= lr * g.beta[j];
    }
    current = current.with_norm(std::move(gamma), std::move(beta));
    const double loss = loss_fn(current);
    ++result.steps_run;
    if (!std::isfinite(loss)) {
      throw AdaptationError("adaptation diverged at step " + std::to_string(step));
    }
    if (loss < result.loss_after) {
      result.loss_after = loss;
      result.model = current;
    }
    rising = loss > previous ? rising + 1 : 0;
    previous = loss;
    if (rising >= kPatience) {
      if (result.lr_halvings == kMaxHalvings) break;
      lr *= 0.5;
      ++result.lr_halvings;
      rising = 0;
    }
  }
  return result;
}

void check_batch(std::span<const Features> batch) {
  if (batch.size() < 2) throw ConfigError("adaptation batch needs at least two inputs");
}

}  // namespace

void AdaptConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (augmentations < 2) throw ConfigError("augmentation count must be >= 2");
  if (augmentation_std < 0.0) throw ConfigError("augmentation std must be >= 0");
}

double entropy(std::span<const double> p) {
  double sum = 0.0;
  double h = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || v > 1.0) throw InvalidInput("probabilities must lie in [0, 1]");
    sum += v;
    if (v > 0.0) h -= v * std::log(v);
  }
  if (p.empty() || std::abs(sum - 1.0) > 1e-6) throw InvalidInput("probabilities must sum to 1");
  return h;
}

double tent_loss(const ToyClassifier& model, std::span<const Features> batch) {
  check_batch(batch);
  double total = 0.0;
  for (const auto& x : batch) total += entropy_of_logits(toy::predict(model, x));
  return total / static_cast<double>(batch.size());
}

NormGradient grad_tent(const ToyClassifier& model, std::span<const Features> batch) {
  check_batch(batch);
  const int d = model.dim();
  const int k = model.classes();
  const auto& head = *model.head;
  NormGradient g{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  std::vector<double> p;
  std::vector<double> dz(k);
  for (const auto& x : batch) {
    const double h = entropy_of_logits(toy::predict(model, x), &p);
    // dH/dz_k = -p_k (log p_k + H)
    for (int c = 0; c < k; ++c) dz[c] = p[c] > 0.0 ? -p[c] * (std::log(p[c]) + h) : 0.0;
    for (int j = 0; j < d; ++j) {
      double dh = 0.0;
      for (int c = 0; c < k; ++c) dh += head.w(j, c) * dz[c];
      g.gamma[j] += dh * x[j];
      g.beta[j] += dh;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (int j = 0; j < d; ++j) {
    g.gamma[j] *= inv;
    g.beta[j] *= inv;
  }
  return g;
}

ToyClassifier renormalized(const ToyClassifier& model, std::span<const Features> batch) {
  check_batch(batch);
  const int d = model.dim();
  const double n = static_cast<double>(batch.size());
  std::vector<double> gamma(d), beta(d);
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& x : batch) mean += x[j];
    mean /= n;
    double var = 0.0;
    for (const auto& x : batch) var += (x[j] - mean) * (x[j] - mean);
    var /= n;
    const double floor = 1e-3 / std::abs(model.gamma[j]);
    gamma[j] = 1.0 / std::max(std::sqrt(var), floor);
    beta[j] = -mean * gamma[j];
  }
  return model.with_norm(std::move(gamma), std::move(beta));
}

AdaptResult adapt_tent(const ToyClassifier& model, std::span<const Features> batch,
                       const AdaptConfig& config) {
  config.validate();
  check_batch(batch);
  for (const auto& x : batch) {
    if (x.size() != static_cast<std::size_t>(model.dim())) throw InvalidInput("batch dimension mismatch");
  }
  const ToyClassifier start = config.renormalize ? renormalized(model, batch) : model;
  return descend(
      model, start, config, [&](const ToyClassifier& m) { return tent_loss(m, batch); },
      [&](const ToyClassifier& m) { return grad_tent(m, batch); });
}

std::vector<std::vector<Features>> memo_augmentations(std::span<const Features> batch,
                                                      const AdaptConfig& config) {
  config.validate();
  std::mt19937_64 rng(mix_seed(config.seed, 0x3e30));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<Features>> out;
  out.reserve(batch.size());
  for (const auto& x : batch) {
    std::vector<Features> copies;
    for (int a = 0; a < config.augmentations; ++a) {
      Features c = x;
      if (config.augmentation_std > 0.0) {
        for (auto& v : c) v += config.augmentation_std * normal(rng);
      }
      copies.push_back(std::move(c));
    }
    out.push_back(std::move(copies));
  }
  return out;
}

double memo_loss(const ToyClassifier& model, const std::vector<std::vector<Features>>& augmented) {
  if (augmented.empty()) throw ConfigError("MEMO needs at least one input");
  const int k = model.classes();
  double total = 0.0;
  for (const auto& copies : augmented) {
    if (copies.size() < 2) throw ConfigError("MEMO needs at least two augmentations");
    std::vector<double> mean(k, 0.0);
    for (const auto& c : copies) {
      const auto p = detect::softmax(toy::predict(model, c));
      for (int q = 0; q < k; ++q) mean[q] += p[q];
    }
    double h = 0.0;
    for (auto& v : mean) {
      v /= static_cast<double>(copies.size());
      if (v > 0.0) h -= v * std::log(v);
    }
    total += h;
  }
  return total / static_cast<double>(augmented.size());
}

AdaptResult adapt_memo(const ToyClassifier& model, std::span<const Features> batch,
                       const AdaptConfig& config) {
  config.validate();
  if (batch.empty()) throw ConfigError("MEMO needs at least one input");
  const auto augmented = memo_augmentations(batch, config);
  auto loss = [&](const ToyClassifier& m) { return memo_loss(m, augmented); };
  auto grad = [&](const ToyClassifier& m) {
    const int d = m.dim();
    NormGradient g{std::vector<double>(d), std::vector<double>(d)};
    for (int which = 0; which < 2; ++which) {
      for (int j = 0; j < d; ++j) {
        auto plus = m.gamma, minus_g = m.gamma;
        auto bplus = m.beta, bminus = m.beta;
        if (which == 0) {
          plus[j] += kMemoStep;
          minus_g[j] -= kMemoStep;
        } else {
          bplus[j] += kMemoStep;
          bminus[j] -= kMemoStep;
        }
        const double up = loss(m.with_norm(plus, bplus));
        const double down = loss(m.with_norm(minus_g, bminus));
        (which == 0 ? g.gamma : g.beta)[j] = (up - down) / (2.0 * kMemoStep);
      }
    }
    return g;
  };
  const ToyClassifier start = config.renormalize ? renormalized(model, batch) : model;
  return descend(model, start, config, loss, grad);
}

}  // namespace driftwatch::adapt
