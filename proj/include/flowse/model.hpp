#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowse/paths.hpp"
#include "flowse/rng.hpp"
#include "flowse/sampler.hpp"

namespace flowse {

// Fully-connected predictor F(x_t, y, t) over the concatenation of x_t, y and
// a sinusoidal embedding of t, with hand-written backpropagation. The final
// layer starts at zero so the untrained model is the zero function, which
// makes early ODE sampling the identity map on y.

enum class Activation { Gelu, Softplus, Tanh };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Gelu: return "gelu";
    case Activation::Softplus: return "softplus";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "softplus") return Activation::Softplus;
  if (s == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::Gelu:
      return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244));
    case Activation::Softplus:
      if (x > 30.0) return x;
      if (x < -30.0) return std::exp(x);
      return std::log1p(std::exp(x));
    case Activation::Tanh:
      return std::tanh(x);
  }
  return x;
}

inline double activate_deriv(Activation a, double x) {
  switch (a) {
    case Activation::Gelu: {
      const double phi_cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
      const double phi_pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
      return phi_cdf + x * phi_pdf;
    }
    case Activation::Softplus:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::Tanh: {
      const double th = std::tanh(x);
      return 1.0 - th * th;
    }
  }
  return 1.0;
}

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

struct PredictorModel {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::Gelu;
  int time_feature_dim = 16;
  LossKind loss_kind = LossKind::Dp;
  int data_dim = 0;

  int input_dim() const { return 2 * data_dim + time_feature_dim; }
  int output_dim() const { return data_dim; }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("PredictorModel: no layers");
    if (data_dim <= 0) throw std::invalid_argument("PredictorModel: data_dim must be positive");
    int expect = input_dim();
    for (const DenseLayer& l : layers) {
      if (l.in != expect) throw std::invalid_argument("PredictorModel: layer shapes do not chain");
      if (l.w.size() != static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) ||
          l.b.size() != static_cast<std::size_t>(l.out))
        throw std::invalid_argument("PredictorModel: parameter buffer size mismatch");
      expect = l.out;
    }
    if (expect != output_dim())
      throw std::invalid_argument("PredictorModel: output dimension mismatch");
    for (const DenseLayer& l : layers) {
      for (double v : l.w)
        if (!std::isfinite(v)) throw std::invalid_argument("PredictorModel: non-finite weight");
      for (double v : l.b)
        if (!std::isfinite(v)) throw std::invalid_argument("PredictorModel: non-finite bias");
    }
  }
};

/// Sinusoidal embedding [sin(2 pi f_i t), cos(2 pi f_i t)] with dim/2
/// frequencies geometrically spaced from 1 to 1000.
inline std::vector<double> time_features(double t, int dim) {
  if (dim <= 0 || dim % 2 != 0)
    throw std::invalid_argument("time_features: dim must be even and positive");
  detail::check_time(t);
  const int m = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  constexpr double two_pi = 6.283185307179586476925;
  for (int i = 0; i < m; ++i) {
    const double f =
        m == 1 ? 1.0 : std::pow(1000.0, static_cast<double>(i) / (m - 1));
    out[2 * static_cast<std::size_t>(i)] = std::sin(two_pi * f * t);
    out[2 * static_cast<std::size_t>(i) + 1] = std::cos(two_pi * f * t);
  }
  return out;
}

namespace detail {

// Per-layer inputs and pre-activations kept for the backward pass.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

inline std::vector<double> run_layers(const PredictorModel& m,
                                      std::vector<double> input,
                                      ForwardCache* cache) {
  const std::size_t n_layers = m.layers.size();
  if (cache) {
    cache->inputs.assign(n_layers, {});
    cache->pre.assign(n_layers, {});
  }
  for (std::size_t li = 0; li < n_layers; ++li) {
    const DenseLayer& l = m.layers[li];
    if (cache) cache->inputs[li] = input;
    std::vector<double> z(static_cast<std::size_t>(l.out));
    for (int o = 0; o < l.out; ++o) {
      const double* row = l.w.data() + static_cast<std::size_t>(o) * l.in;
      double acc = l.b[static_cast<std::size_t>(o)];
      for (int i = 0; i < l.in; ++i) acc += row[i] * input[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = acc;
    }
    if (cache) cache->pre[li] = z;
    const bool last = li + 1 == n_layers;
    if (!last)
      for (double& v : z) v = activate(m.activation, v);
    input = std::move(z);
  }
  return input;
}

inline std::vector<double> assemble_input(const PredictorModel& m,
                                          const std::vector<double>& x_t,
                                          const std::vector<double>& y, double t) {
  if (static_cast<int>(x_t.size()) != m.data_dim ||
      static_cast<int>(y.size()) != m.data_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  for (double v : x_t)
    if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite x_t");
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite y");
  std::vector<double> input;
  input.reserve(static_cast<std::size_t>(m.input_dim()));
  input.insert(input.end(), x_t.begin(), x_t.end());
  input.insert(input.end(), y.begin(), y.end());
  const std::vector<double> tf = time_features(t, m.time_feature_dim);
  input.insert(input.end(), tf.begin(), tf.end());
  return input;
}

}  // namespace detail

/// MLP evaluation over the concatenated (x_t, y, time_features(t)).
inline std::vector<double> forward(const PredictorModel& m,
                                   const std::vector<double>& x_t,
                                   const std::vector<double>& y, double t) {
  return detail::run_layers(m, detail::assemble_input(m, x_t, y, t), nullptr);
}

/// Adapts a model to the sampler's predictor interface.
inline Predictor as_predictor(const PredictorModel& m) {
  return [&m](const std::vector<double>& x_t, const std::vector<double>& y,
              double t) { return forward(m, x_t, y, t); };
}

/// One drawn training tuple: x_t ~ p_t(. | x0, y) at t ~ U[t_min, 1] with the
/// regression target fixed by the loss kind (x0 for DP, x0 - y for FM).
struct TrainingExample {
  std::vector<double> x_t;
  std::vector<double> y;
  double t = 0.0;
  std::vector<double> target;
};

inline std::vector<TrainingExample> make_training_examples(
    const PathSpec& spec, const PairedBatch& batch, LossKind loss_kind, Rng& rng,
    double t_min = 0.0, NoiseDomain domain = NoiseDomain::Real) {
  batch.validate();
  if (batch.size() == 0)
    throw std::invalid_argument("make_training_examples: empty batch");
  if (loss_kind == LossKind::Fm && spec.family != PathFamily::Icfm)
    throw std::invalid_argument(
        "make_training_examples: fm targets are defined on the icfm path only");
  if (!(t_min >= 0.0 && t_min < 1.0))
    throw std::invalid_argument("make_training_examples: t_min must lie in [0, 1)");
  std::vector<TrainingExample> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    TrainingExample e;
    e.t = t_min + (1.0 - t_min) * rng.uniform();
    e.x_t = sample_perturbation(spec, batch.x0[i], batch.y[i], e.t, rng, domain);
    e.y = batch.y[i];
    if (loss_kind == LossKind::Dp) {
      e.target = batch.x0[i];
    } else {
      e.target.resize(batch.dim);
      for (std::size_t j = 0; j < batch.dim; ++j)
        e.target[j] = batch.x0[i][j] - batch.y[i][j];
    }
    out.push_back(std::move(e));
  }
  return out;
}

using Gradients = std::vector<DenseLayer>;

inline Gradients zero_gradients(const PredictorModel& m) {
  Gradients g(m.layers.size());
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    g[li].in = m.layers[li].in;
    g[li].out = m.layers[li].out;
    g[li].w.assign(m.layers[li].w.size(), 0.0);
    g[li].b.assign(m.layers[li].b.size(), 0.0);
  }
  return g;
}

/// Squared-error loss, averaged over examples and coordinates, with exact
/// analytic parameter gradients when grads is non-null.
inline double loss_and_gradient(const PredictorModel& m,
                                const std::vector<TrainingExample>& examples,
                                Gradients* grads) {
  if (examples.empty())
    throw std::invalid_argument("loss_and_gradient: empty example set");
  if (grads) *grads = zero_gradients(m);
  const double norm =
      1.0 / (static_cast<double>(examples.size()) * static_cast<double>(m.data_dim));
  double loss = 0.0;
  detail::ForwardCache cache;
  const std::size_t n_layers = m.layers.size();
  for (const TrainingExample& e : examples) {
    const std::vector<double> input = detail::assemble_input(m, e.x_t, e.y, e.t);
    const std::vector<double> f = detail::run_layers(m, input, grads ? &cache : nullptr);
    if (!grads) {
      for (std::size_t j = 0; j < f.size(); ++j) {
        const double d = f[j] - e.target[j];
        loss += d * d * norm;
      }
      continue;
    }
    std::vector<double> delta(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) {
      const double d = f[j] - e.target[j];
      loss += d * d * norm;
      delta[j] = 2.0 * d * norm;
    }
    for (std::size_t li = n_layers; li-- > 0;) {
      const DenseLayer& l = m.layers[li];
      DenseLayer& g = (*grads)[li];
      const std::vector<double>& lin = cache.inputs[li];
      for (int o = 0; o < l.out; ++o) {
        const double dz = delta[static_cast<std::size_t>(o)];
        double* grow = g.w.data() + static_cast<std::size_t>(o) * l.in;
        for (int i = 0; i < l.in; ++i) grow[i] += dz * lin[static_cast<std::size_t>(i)];
        g.b[static_cast<std::size_t>(o)] += dz;
      }
      if (li == 0) break;
      std::vector<double> prev(static_cast<std::size_t>(l.in), 0.0);
      for (int o = 0; o < l.out; ++o) {
        const double dz = delta[static_cast<std::size_t>(o)];
        const double* row = l.w.data() + static_cast<std::size_t>(o) * l.in;
        for (int i = 0; i < l.in; ++i) prev[static_cast<std::size_t>(i)] += dz * row[i];
      }
      const std::vector<double>& pre_prev = cache.pre[li - 1];
      for (int i = 0; i < l.in; ++i)
        prev[static_cast<std::size_t>(i)] *=
            activate_deriv(m.activation, pre_prev[static_cast<std::size_t>(i)]);
      delta = std::move(prev);
    }
  }
  return loss;
}

/// Draws fresh (t, x_t) tuples for the batch and returns the loss with its
/// gradients.
inline std::pair<double, Gradients> loss(const PredictorModel& m,
                                         const PairedBatch& batch,
                                         const PathSpec& spec, Rng& rng,
                                         double t_min = 0.0,
                                         NoiseDomain domain = NoiseDomain::Real) {
  const std::vector<TrainingExample> examples =
      make_training_examples(spec, batch, m.loss_kind, rng, t_min, domain);
  Gradients grads;
  const double value = loss_and_gradient(m, examples, &grads);
  return {value, std::move(grads)};
}

/// Loss of an arbitrary predictor on a fixed example set; used to compare
/// models against analytic references on common draws.
inline double predictor_loss(const Predictor& predict,
                             const std::vector<TrainingExample>& examples) {
  if (examples.empty())
    throw std::invalid_argument("predictor_loss: empty example set");
  const std::size_t dim = examples.front().target.size();
  double total = 0.0;
  for (const TrainingExample& e : examples) {
    const std::vector<double> f = predict(e.x_t, e.y, e.t);
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = f[j] - e.target[j];
      total += d * d;
    }
  }
  return total / (static_cast<double>(examples.size()) * static_cast<double>(dim));
}

// Flat parameter addressing (layers in order, weights then biases); used by
// the optimizer and the finite-difference checks.
inline std::size_t parameter_count(const PredictorModel& m) {
  std::size_t n = 0;
  for (const DenseLayer& l : m.layers) n += l.w.size() + l.b.size();
  return n;
}

inline double& parameter_at(PredictorModel& m, std::size_t index) {
  for (DenseLayer& l : m.layers) {
    if (index < l.w.size()) return l.w[index];
    index -= l.w.size();
    if (index < l.b.size()) return l.b[index];
    index -= l.b.size();
  }
  throw std::out_of_range("parameter_at: index past end");
}

inline double gradient_at(const Gradients& g, std::size_t index) {
  for (const DenseLayer& l : g) {
    if (index < l.w.size()) return l.w[index];
    index -= l.w.size();
    if (index < l.b.size()) return l.b[index];
    index -= l.b.size();
  }
  throw std::out_of_range("gradient_at: index past end");
}

/// Fresh model with scaled-normal hidden layers and a zero final layer.
inline PredictorModel make_predictor(int data_dim, const std::vector<int>& hidden,
                                     Activation activation, int time_feature_dim,
                                     LossKind loss_kind, Rng& rng) {
  if (data_dim <= 0) throw std::invalid_argument("make_predictor: data_dim must be positive");
  for (int h : hidden)
    if (h <= 0) throw std::invalid_argument("make_predictor: hidden sizes must be positive");
  PredictorModel m;
  m.activation = activation;
  m.time_feature_dim = time_feature_dim;
  m.loss_kind = loss_kind;
  m.data_dim = data_dim;
  std::vector<int> sizes;
  sizes.push_back(m.input_dim());
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(data_dim);
  for (std::size_t li = 0; li + 1 < sizes.size(); ++li) {
    DenseLayer l;
    l.in = sizes[li];
    l.out = sizes[li + 1];
    l.w.resize(static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out));
    l.b.assign(static_cast<std::size_t>(l.out), 0.0);
    const bool final_layer = li + 2 == sizes.size();
    if (final_layer) {
      std::fill(l.w.begin(), l.w.end(), 0.0);
    } else {
      const double scale = std::sqrt(1.0 / l.in);
      for (double& v : l.w) v = scale * rng.normal();
    }
    m.layers.push_back(std::move(l));
  }
  m.validate();
  return m;
}

struct TrainConfig {
  PathSpec path;
  LossKind loss_kind = LossKind::Dp;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 128;
  int n_steps = 20000;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {128, 128, 128};
  Activation activation = Activation::Gelu;
  int time_feature_dim = 16;
  double t_min = 0.0;
  NoiseDomain noise_domain = NoiseDomain::Real;

  void validate() const {
    path.validate();
    if (!(learning_rate >= 0.0))
      throw std::invalid_argument("TrainConfig: learning rate must be nonnegative");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    if (n_steps < 0) throw std::invalid_argument("TrainConfig: step count must be >= 0");
    if (loss_kind == LossKind::Fm && path.family != PathFamily::Icfm)
      throw std::invalid_argument("TrainConfig: fm loss requires the icfm path");
    if (time_feature_dim <= 0 || time_feature_dim % 2 != 0)
      throw std::invalid_argument("TrainConfig: time_feature_dim must be even");
  }
};

/// Supplies paired batches on demand; called once per optimizer step.
using BatchSource = std::function<PairedBatch(int batch_size, Rng& rng)>;

struct TrainResult {
  PredictorModel model;
  std::vector<double> loss_trace;
};

/// Adam-driven training loop. Deterministic given the generator seed; aborts
/// with the step index if the loss stops being finite.
inline TrainResult train(const TrainConfig& cfg, const BatchSource& source, Rng& rng) {
  cfg.validate();
  const PairedBatch probe = source(1, rng);
  probe.validate();
  if (probe.dim == 0) throw std::invalid_argument("train: source yields empty vectors");

  TrainResult result;
  result.model = make_predictor(static_cast<int>(probe.dim), cfg.hidden, cfg.activation,
                                cfg.time_feature_dim, cfg.loss_kind, rng);
  PredictorModel& m = result.model;

  Gradients g;
  Gradients adam_m = zero_gradients(m);
  Gradients adam_v = zero_gradients(m);
  double b1t = 1.0, b2t = 1.0;

  const auto adam_update = [&cfg](std::vector<double>& param, const std::vector<double>& grad,
                                  std::vector<double>& mom1, std::vector<double>& mom2,
                                  double corr1, double corr2) {
    for (std::size_t p = 0; p < param.size(); ++p) {
      mom1[p] = cfg.beta1 * mom1[p] + (1.0 - cfg.beta1) * grad[p];
      mom2[p] = cfg.beta2 * mom2[p] + (1.0 - cfg.beta2) * grad[p] * grad[p];
      const double m_hat = mom1[p] / corr1;
      const double v_hat = mom2[p] / corr2;
      param[p] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  };

  result.loss_trace.reserve(static_cast<std::size_t>(cfg.n_steps));
  for (int step = 1; step <= cfg.n_steps; ++step) {
    const PairedBatch batch = source(cfg.batch_size, rng);
    const std::vector<TrainingExample> examples = make_training_examples(
        cfg.path, batch, cfg.loss_kind, rng, cfg.t_min, cfg.noise_domain);
    const double step_loss = loss_and_gradient(m, examples, &g);
    if (!std::isfinite(step_loss))
      throw std::runtime_error("train: loss diverged at step " + std::to_string(step));
    result.loss_trace.push_back(step_loss);

    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
      adam_update(m.layers[li].w, g[li].w, adam_m[li].w, adam_v[li].w, 1.0 - b1t, 1.0 - b2t);
      adam_update(m.layers[li].b, g[li].b, adam_m[li].b, adam_v[li].b, 1.0 - b1t, 1.0 - b2t);
    }
  }
  return result;
}

inline TrainResult train(const TrainConfig& cfg, const BatchSource& source) {
  Rng rng(cfg.seed);
  return train(cfg, source, rng);
}

/// DDP and ODE entry points bound to a trained model.
inline std::vector<double> ddp_infer(const PredictorModel& m, const std::vector<double>& y) {
  m.validate();
  return ddp_infer(as_predictor(m), m.loss_kind, y);
}

inline std::vector<double> solve_ode(const PredictorModel& m, const std::vector<double>& y,
                                     const InferenceConfig& cfg, const Schedule& schedule) {
  if (m.loss_kind != cfg.loss_kind)
    throw std::invalid_argument("solve_ode: model loss kind does not match config");
  return solve_ode(as_predictor(m), y, cfg, schedule);
}

}  // namespace flowse
