#include "driftwatch/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "driftwatch/detect.hpp"
#include "driftwatch/errors.hpp"
#include "driftwatch/hash.hpp"
#include "driftwatch/serialization.hpp"

namespace driftwatch::toy {

namespace {

// Corruption magnitudes per unit of severity.
constexpr double kShiftPerLevel = 0.5;
constexpr double kFogContractionPerLevel = 0.15;
constexpr double kHazeScale = 2.0;
// Rain is streak noise on a fixed quarter of the coordinates plus contrast
// loss. Isotropic noise alone pushes half the inputs away from the class
// means, where a linear head is more confident, so it barely registers on MSP;
// it also destroys information no normalization layer can get back.
constexpr double kRainNoisePerLevel = 0.8;
constexpr double kRainNoiseFraction = 0.25;
constexpr double kRainContrastPerLevel = 1.0 / 6.0;
// Snow hides a few coordinates and washes out the rest.
constexpr double kMaskFractionPerLevel = 0.08;
constexpr double kSnowContrastPerLevel = 0.13;

std::vector<std::size_t> coordinate_order(std::mt19937_64& pattern, std::size_t d) {
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), pattern);
  return order;
}

std::size_t leading(double fraction, std::size_t d) {
  return std::min(d, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(d))));
}

void check_dim(const ToyClassifier& model, std::size_t n) {
  if (!model.head) throw InvalidInput("classifier has no head");
  if (n != static_cast<std::size_t>(model.dim())) {
    throw InvalidInput("feature dimension " + std::to_string(n) + " does not match model dimension " +
                       std::to_string(model.dim()));
  }
}

// Row-major dim x classes gradient plus bias gradient for the regularized
// softmax-regression objective on standardized features h.
double objective(const std::vector<Features>& h, const std::vector<int>& y,
                 const std::vector<double>& w, const std::vector<double>& b, int d, int k,
                 double l2, std::vector<double>* gw, std::vector<double>* gb) {
  const std::size_t n = h.size();
  if (gw) std::fill(gw->begin(), gw->end(), 0.0);
  if (gb) std::fill(gb->begin(), gb->end(), 0.0);
  std::vector<double> z(k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < k; ++c) {
      double s = b[c];
      for (int j = 0; j < d; ++j) s += w[j * k + c] * h[i][j];
      z[c] = s;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(z[c] - mx);
    const double lse = mx + std::log(sum);
    loss += lse - z[y[i]];
    if (gw) {
      for (int c = 0; c < k; ++c) {
        const double r = std::exp(z[c] - lse) - (c == y[i] ? 1.0 : 0.0);
        (*gb)[c] += r;
        for (int j = 0; j < d; ++j) (*gw)[j * k + c] += r * h[i][j];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  double reg = 0.0;
  for (double v : w) reg += v * v;
  if (gw) {
    for (std::size_t q = 0; q < gw->size(); ++q) (*gw)[q] = (*gw)[q] * inv + l2 * w[q];
    for (auto& v : *gb) v *= inv;
  }
  return loss * inv + 0.5 * l2 * reg;
}

// Upper bound on the objective's curvature: 0.5 * lambda_max(A^T A / n) + l2,
// where A is the feature matrix with a bias column.
double lipschitz_bound(const std::vector<Features>& h, int d, double l2) {
  const int m = d + 1;
  std::vector<double> cov(static_cast<std::size_t>(m) * m, 0.0);
  for (const auto& row : h) {
    for (int a = 0; a < m; ++a) {
      const double va = a < d ? row[a] : 1.0;
      for (int c = 0; c < m; ++c) cov[a * m + c] += va * (c < d ? row[c] : 1.0);
    }
  }
  for (auto& v : cov) v /= static_cast<double>(h.size());
  std::vector<double> v(m, 1.0);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    std::vector<double> nv(m, 0.0);
    for (int a = 0; a < m; ++a) {
      for (int c = 0; c < m; ++c) nv[a] += cov[a * m + c] * v[c];
    }
    const double norm = std::sqrt(std::inner_product(nv.begin(), nv.end(), nv.begin(), 0.0));
    if (norm == 0.0) break;
    for (int a = 0; a < m; ++a) v[a] = nv[a] / norm;
    lambda = norm;
  }
  // Power iteration approaches from below; pad it.
  return 0.5 * lambda * 1.05 + l2;
}

std::mt19937_64 pattern_rng(const std::string& cause, std::size_t dim) {
  return std::mt19937_64(mix_seed(fnv1a(cause), dim));
}

// The point contractions move toward: the corruption's anchor when given, else a
// fixed pseudo-random point per cause.
Features anchor_for(const CorruptionSpec& spec, std::mt19937_64& pattern, std::size_t d) {
  if (!spec.anchor.empty()) {
    if (spec.anchor.size() != d) throw InvalidInput("corruption anchor has wrong dimension");
    return spec.anchor;
  }
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Features a(d);
  for (auto& v : a) v = kHazeScale * unit(pattern);
  return a;
}

}  // namespace

void SyntheticTask::validate() const {
  if (classes < 2) throw ConfigError("task needs at least two classes");
  if (dim < 1) throw ConfigError("task dimension must be positive");
  if (means.size() != static_cast<std::size_t>(classes)) throw ConfigError("one mean per class required");
  for (const auto& m : means) {
    if (m.size() != static_cast<std::size_t>(dim)) throw ConfigError("class mean has wrong dimension");
  }
  if (!(noise_scale > 0.0)) throw ConfigError("noise scale must be positive");
  if (label_probs.size() != static_cast<std::size_t>(classes)) {
    throw ConfigError("label distribution has wrong length");
  }
  double total = 0.0;
  for (double p : label_probs) {
    if (p < 0.0) throw ConfigError("negative label probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("label probabilities must sum to 1");
  if (train_per_class < 1 || validation_per_class < 1) throw ConfigError("sample counts must be positive");
  if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
}

SyntheticTask SyntheticTask::generate(const TaskConfig& config, std::uint64_t seed) {
  if (config.classes < 2 || config.dim < 1) throw ConfigError("task needs K >= 2 and d >= 1");
  if (config.min_separation > config.max_separation) throw ConfigError("separation range is inverted");
  std::mt19937_64 rng(mix_seed(seed, 0x7a5c));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  SyntheticTask task;
  task.classes = config.classes;
  task.dim = config.dim;
  task.noise_scale = config.noise_scale;
  task.train_per_class = config.train_per_class;
  task.validation_per_class = config.validation_per_class;
  task.l2 = config.l2;
  task.label_probs.assign(config.classes, 1.0 / config.classes);

  Features offset(config.dim);
  for (auto& v : offset) v = config.offset_scale * unit(rng);
  for (int k = 0; k < config.classes; ++k) {
    Features u(config.dim);
    for (auto& v : u) v = normal(rng);
    const double norm = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    const double r = config.classes == 1
                         ? config.max_separation
                         : config.min_separation + (config.max_separation - config.min_separation) * k /
                                                       (config.classes - 1);
    Features m(config.dim);
    for (int j = 0; j < config.dim; ++j) m[j] = offset[j] + r * u[j] / norm;
    task.means.push_back(std::move(m));
  }
  task.validate();
  return task;
}

Features SyntheticTask::center() const {
  Features c(dim, 0.0);
  for (int k = 0; k < classes; ++k) {
    for (int j = 0; j < dim; ++j) c[j] += label_probs[k] * means[k][j];
  }
  return c;
}

Features draw_features(const SyntheticTask& task, int label, std::mt19937_64& rng) {
  if (label < 0 || label >= task.classes) throw InvalidInput("label out of range");
  std::normal_distribution<double> normal(0.0, task.noise_scale);
  Features x(task.dim);
  for (int j = 0; j < task.dim; ++j) x[j] = task.means[label][j] + normal(rng);
  return x;
}

std::vector<LabeledSample> draw_samples(const SyntheticTask& task, int per_class,
                                        std::mt19937_64& rng) {
  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(per_class) * task.classes);
  for (int i = 0; i < per_class; ++i) {
    for (int k = 0; k < task.classes; ++k) out.push_back({draw_features(task, k, rng), k});
  }
  return out;
}

ToyClassifier ToyClassifier::with_norm(std::vector<double> g, std::vector<double> b) const {
  ToyClassifier copy = *this;
  copy.gamma = std::move(g);
  copy.beta = std::move(b);
  return copy;
}

ToyClassifier train_clean(const SyntheticTask& task, std::uint64_t seed,
                          const TrainOptions& options, TrainingReport* report) {
  task.validate();
  const int d = task.dim;
  const int k = task.classes;
  std::mt19937_64 rng(mix_seed(seed, 0x74a1));
  const auto train = draw_samples(task, task.train_per_class, rng);
  const auto validation = draw_samples(task, task.validation_per_class, rng);

  ToyClassifier model;
  model.gamma.assign(d, 1.0);
  model.beta.assign(d, 0.0);
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& s : train) mean += s.x[j];
    mean /= static_cast<double>(train.size());
    double var = 0.0;
    for (const auto& s : train) var += (s.x[j] - mean) * (s.x[j] - mean);
    var /= static_cast<double>(train.size());
    const double sd = std::sqrt(std::max(var, 1e-12));
    model.gamma[j] = 1.0 / sd;
    model.beta[j] = -mean / sd;
  }

  std::vector<Features> h;
  std::vector<int> y;
  h.reserve(train.size());
  for (const auto& s : train) {
    Features v(d);
    for (int j = 0; j < d; ++j) v[j] = model.gamma[j] * s.x[j] + model.beta[j];
    h.push_back(std::move(v));
    y.push_back(s.label);
  }

  // Nesterov-accelerated gradient descent with function-value restart.
  const double step = 1.0 / lipschitz_bound(h, d, task.l2);
  std::vector<double> w(static_cast<std::size_t>(d) * k, 0.0), b(k, 0.0);
  std::vector<double> w_prev = w, b_prev = b, yw = w, yb = b;
  std::vector<double> gw(w.size()), gb(k);
  double t = 1.0;
  double loss = objective(h, y, w, b, d, k, task.l2, nullptr, nullptr);
  double gnorm = INFINITY;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    objective(h, y, yw, yb, d, k, task.l2, &gw, &gb);
    w_prev = w;
    b_prev = b;
    for (std::size_t q = 0; q < w.size(); ++q) w[q] = yw[q] - step * gw[q];
    for (int c = 0; c < k; ++c) b[c] = yb[c] - step * gb[c];
    const double next = objective(h, y, w, b, d, k, task.l2, &gw, &gb);
    gnorm = 0.0;
    for (double g : gw) gnorm = std::max(gnorm, std::abs(g));
    for (double g : gb) gnorm = std::max(gnorm, std::abs(g));
    if (!std::isfinite(next)) {
      throw TrainingError("training diverged at iteration " + std::to_string(it));
    }
    if (gnorm <= options.tolerance) {
      loss = next;
      ++it;
      break;
    }
    if (next > loss) {
      t = 1.0;
      yw = w;
      yb = b;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double mom = (t - 1.0) / t_next;
      for (std::size_t q = 0; q < w.size(); ++q) yw[q] = w[q] + mom * (w[q] - w_prev[q]);
      for (int c = 0; c < k; ++c) yb[c] = b[c] + mom * (b[c] - b_prev[c]);
      t = t_next;
    }
    loss = next;
  }
  if (gnorm > options.tolerance) {
    throw TrainingError("training did not converge in " + std::to_string(options.max_iterations) +
                        " iterations (gradient max-norm " + std::to_string(gnorm) + ", loss " +
                        std::to_string(loss) + ")");
  }

  auto head = std::make_shared<LinearHead>();
  head->dim = d;
  head->classes = k;
  head->weights = std::move(w);
  head->bias = std::move(b);
  model.head = std::move(head);

  model.clean_msp_reference.reserve(validation.size());
  for (const auto& s : validation) {
    model.clean_msp_reference.push_back(detect::msp_score(predict(model, s.x)));
  }
  if (report) {
    report->iterations = it;
    report->final_loss = loss;
    report->gradient_norm = gnorm;
    report->validation_accuracy = accuracy(model, validation);
  }
  return model;
}

std::vector<double> predict(const ToyClassifier& model, std::span<const double> x) {
  check_dim(model, x.size());
  const auto& head = *model.head;
  std::vector<double> z(head.bias);
  for (int j = 0; j < head.dim; ++j) {
    const double hj = model.gamma[j] * x[j] + model.beta[j];
    const double* row = head.weights.data() + static_cast<std::size_t>(j) * head.classes;
    for (int c = 0; c < head.classes; ++c) z[c] += row[c] * hj;
  }
  return z;
}

int predict_label(const ToyClassifier& model, std::span<const double> x) {
  const auto z = predict(model, x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double accuracy(const ToyClassifier& model, std::span<const LabeledSample> samples) {
  if (samples.empty()) throw InvalidInput("accuracy of an empty stream");
  std::size_t correct = 0;
  for (const auto& s : samples) correct += predict_label(model, s.x) == s.label;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

const char* to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::shift:
      return "shift";
    case CorruptionKind::scale:
      return "scale";
    case CorruptionKind::additive_noise:
      return "additive-noise";
    case CorruptionKind::feature_mask:
      return "feature-mask";
    case CorruptionKind::identity:
      return "identity";
  }
  return "?";
}

CorruptionSpec corruption_for(const std::string& cause, int severity) {
  if (severity < 0 || severity > 5) throw ConfigError("severity must be within 0..5");
  CorruptionKind kind;
  auto starts = [&](const char* p) { return cause.rfind(p, 0) == 0; };
  if (cause == "clear-day") {
    kind = CorruptionKind::identity;
  } else if (cause == "rain" || starts("noise")) {
    kind = CorruptionKind::additive_noise;
  } else if (cause == "snow" || starts("mask")) {
    kind = CorruptionKind::feature_mask;
  } else if (cause == "fog" || starts("scale")) {
    kind = CorruptionKind::scale;
  } else if (starts("shift")) {
    kind = CorruptionKind::shift;
  } else {
    throw ConfigError("unknown corruption cause '" + cause + "'");
  }
  return {cause, kind, severity, {}};
}

Features corrupt(std::span<const double> x, const CorruptionSpec& spec, std::uint64_t seed) {
  if (spec.severity < 0 || spec.severity > 5) throw ConfigError("severity must be within 0..5");
  Features out(x.begin(), x.end());
  if (spec.severity == 0 || spec.kind == CorruptionKind::identity) return out;
  const std::size_t d = out.size();
  const double sev = spec.severity;
  auto pattern = pattern_rng(spec.cause, d);

  switch (spec.kind) {
    case CorruptionKind::shift: {
      std::bernoulli_distribution sign(0.5);
      for (std::size_t j = 0; j < d; ++j) out[j] += (sign(pattern) ? 1.0 : -1.0) * kShiftPerLevel * sev;
      break;
    }
    case CorruptionKind::scale: {
      // Haze is a property of the weather, not of the data, so the anchor is
      // ignored here.
      CorruptionSpec own = spec;
      own.anchor.clear();
      const auto haze = anchor_for(own, pattern, d);
      const double keep = 1.0 - kFogContractionPerLevel * sev;
      for (std::size_t j = 0; j < d; ++j) out[j] = haze[j] + keep * (out[j] - haze[j]);
      break;
    }
    case CorruptionKind::additive_noise: {
      const auto order = coordinate_order(pattern, d);
      const auto center = anchor_for(spec, pattern, d);
      const double keep = 1.0 - kRainContrastPerLevel * sev;
      for (std::size_t j = 0; j < d; ++j) out[j] = center[j] + keep * (out[j] - center[j]);
      std::mt19937_64 rng(mix_seed(seed, fnv1a(spec.cause)));
      std::normal_distribution<double> normal(0.0, kRainNoisePerLevel * sev);
      const auto n = leading(kRainNoiseFraction, d);
      for (std::size_t q = 0; q < n; ++q) out[order[q]] += normal(rng);
      break;
    }
    case CorruptionKind::feature_mask: {
      // A fixed coordinate order per cause, so higher severities mask a
      // superset of the coordinates masked at lower ones.
      const auto order = coordinate_order(pattern, d);
      const auto center = anchor_for(spec, pattern, d);
      const double keep = 1.0 - kSnowContrastPerLevel * sev;
      for (std::size_t j = 0; j < d; ++j) out[j] = center[j] + keep * (out[j] - center[j]);
      const auto n = leading(kMaskFractionPerLevel * sev, d);
      for (std::size_t q = 0; q < n; ++q) out[order[q]] = 0.0;
      break;
    }
    case CorruptionKind::identity:
      break;
  }
  return out;
}

nlohmann::json to_json(const ToyClassifier& model) {
  if (!model.head) throw InvalidInput("classifier has no head");
  return {{"version_id", model.version_id},
          {"parent_version", model.parent_version},
          {"cause", model.cause},
          {"dim", model.dim()},
          {"classes", model.classes()},
          {"gamma", model.gamma},
          {"beta", model.beta},
          {"weights", model.head->weights},
          {"bias", model.head->bias},
          {"clean_msp_reference", model.clean_msp_reference}};
}

ToyClassifier classifier_from_json(const nlohmann::json& j) {
  try {
    auto head = std::make_shared<LinearHead>();
    head->dim = j.at("dim").get<int>();
    head->classes = j.at("classes").get<int>();
    head->weights = j.at("weights").get<std::vector<double>>();
    head->bias = j.at("bias").get<std::vector<double>>();
    ToyClassifier m;
    m.gamma = j.at("gamma").get<std::vector<double>>();
    m.beta = j.at("beta").get<std::vector<double>>();
    if (head->weights.size() != static_cast<std::size_t>(head->dim) * head->classes ||
        head->bias.size() != static_cast<std::size_t>(head->classes) ||
        m.gamma.size() != static_cast<std::size_t>(head->dim) ||
        m.beta.size() != static_cast<std::size_t>(head->dim)) {
      throw InvalidInput("classifier record has inconsistent dimensions");
    }
    m.head = std::move(head);
    m.version_id = j.value("version_id", "clean");
    m.parent_version = j.value("parent_version", "");
    if (j.contains("cause")) m.cause = j.at("cause").get<Itemset>();
    m.clean_msp_reference = j.value("clean_msp_reference", std::vector<double>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed classifier record: ") + e.what());
  }
}

}  // namespace driftwatch::toy
