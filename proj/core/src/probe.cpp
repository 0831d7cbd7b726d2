#include "refinery/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "refinery/io.hpp"
#include "refinery/rng.hpp"

namespace refinery {

namespace {

// hidden = relu(x W1 + b1) for one sample.
void forward_hidden(const ProbeModel& m, std::span<const double> x,
                    std::span<double> hidden) {
  for (std::size_t h = 0; h < m.hidden_dim; ++h) hidden[h] = m.b1[h];
  for (std::size_t j = 0; j < m.input_dim; ++j) {
    const double xj = x[j];
    if (xj == 0.0) continue;
    const double* w_row = m.w1.data() + j * m.hidden_dim;
    for (std::size_t h = 0; h < m.hidden_dim; ++h) hidden[h] += xj * w_row[h];
  }
  for (std::size_t h = 0; h < m.hidden_dim; ++h) {
    if (hidden[h] < 0.0) hidden[h] = 0.0;
  }
}

void forward_logits(const ProbeModel& m, std::span<const double> hidden,
                    std::span<double> logits) {
  for (std::size_t c = 0; c < m.class_count; ++c) logits[c] = m.b2[c];
  for (std::size_t h = 0; h < m.hidden_dim; ++h) {
    const double hv = hidden[h];
    if (hv == 0.0) continue;
    const double* w_row = m.w2.data() + h * m.class_count;
    for (std::size_t c = 0; c < m.class_count; ++c) logits[c] += hv * w_row[c];
  }
}

// In-place softmax with max subtraction; returns log(sum exp(z - max)) + max.
void softmax_inplace(std::span<double> z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

double weight_norm_sq(const ProbeModel& m) {
  double s = 0.0;
  for (double v : m.w1) s += v * v;
  for (double v : m.w2) s += v * v;
  return s;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw Error(ErrorKind::config, "probe: epochs < 0");
  if (cfg.batch_size < 1) throw Error(ErrorKind::config, "probe: batch_size < 1");
  if (cfg.learning_rate < 0.0) {
    throw Error(ErrorKind::config, "probe: learning_rate < 0");
  }
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw Error(ErrorKind::config, "probe: momentum outside [0, 1)");
  }
  if (cfg.weight_decay < 0.0) {
    throw Error(ErrorKind::config, "probe: weight_decay < 0");
  }
}

double probe_loss(const ProbeModel& m, const FeatureMatrix& x,
                  std::span<const int> y, double weight_decay) {
  std::vector<double> hidden(m.hidden_dim), logits(m.class_count);
  double total = 0.0;
  for (std::size_t i = 0; i < x.n_samples; ++i) {
    forward_hidden(m, x.row(i), hidden);
    forward_logits(m, hidden, logits);
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double lse = 0.0;
    for (double v : logits) lse += std::exp(v - mx);
    lse = std::log(lse) + mx;
    total += lse - logits[std::size_t(y[i])];
  }
  return total / double(x.n_samples) + 0.5 * weight_decay * weight_norm_sq(m);
}

ProbeGradient probe_gradient(const ProbeModel& m, const FeatureMatrix& x,
                             std::span<const int> y, double weight_decay,
                             double* loss_out) {
  ProbeGradient g;
  g.w1.assign(m.w1.size(), 0.0);
  g.b1.assign(m.b1.size(), 0.0);
  g.w2.assign(m.w2.size(), 0.0);
  g.b2.assign(m.b2.size(), 0.0);

  const double inv_n = 1.0 / double(x.n_samples);
  double loss_total = 0.0;
  std::vector<double> hidden(m.hidden_dim), probs(m.class_count),
      dhidden(m.hidden_dim);
  for (std::size_t i = 0; i < x.n_samples; ++i) {
    const auto xi = x.row(i);
    forward_hidden(m, xi, hidden);
    forward_logits(m, hidden, probs);
    softmax_inplace(probs);
    loss_total += -std::log(std::max(probs[std::size_t(y[i])], 1e-300));
    probs[std::size_t(y[i])] -= 1.0;  // dlogits (unscaled)

    // Second layer.
    for (std::size_t h = 0; h < m.hidden_dim; ++h) {
      const double hv = hidden[h];
      double dh = 0.0;
      const double* w_row = m.w2.data() + h * m.class_count;
      double* gw_row = g.w2.data() + h * m.class_count;
      for (std::size_t c = 0; c < m.class_count; ++c) {
        gw_row[c] += hv * probs[c] * inv_n;
        dh += w_row[c] * probs[c];
      }
      dhidden[h] = hv > 0.0 ? dh : 0.0;  // ReLU mask
    }
    for (std::size_t c = 0; c < m.class_count; ++c) {
      g.b2[c] += probs[c] * inv_n;
    }

    // First layer.
    for (std::size_t j = 0; j < m.input_dim; ++j) {
      const double xj = xi[j];
      if (xj == 0.0) continue;
      double* gw_row = g.w1.data() + j * m.hidden_dim;
      for (std::size_t h = 0; h < m.hidden_dim; ++h) {
        gw_row[h] += xj * dhidden[h] * inv_n;
      }
    }
    for (std::size_t h = 0; h < m.hidden_dim; ++h) {
      g.b1[h] += dhidden[h] * inv_n;
    }
  }

  for (std::size_t i = 0; i < m.w1.size(); ++i) g.w1[i] += weight_decay * m.w1[i];
  for (std::size_t i = 0; i < m.w2.size(); ++i) g.w2[i] += weight_decay * m.w2[i];
  if (loss_out) {
    *loss_out =
        loss_total * inv_n + 0.5 * weight_decay * weight_norm_sq(m);
  }
  return g;
}

ProbeModel train_probe(const LabeledDataset& d, std::size_t hidden_dim,
                       const TrainConfig& cfg,
                       std::vector<double>* epoch_losses) {
  validate(d);
  validate(cfg);
  if (d.class_count < 2) {
    throw Error(ErrorKind::infeasible, "train_probe: need >= 2 classes");
  }
  if (hidden_dim < 1) {
    throw Error(ErrorKind::config, "train_probe: hidden_dim < 1");
  }

  ProbeModel m;
  m.input_dim = d.features.dim;
  m.hidden_dim = hidden_dim;
  m.class_count = std::size_t(d.class_count);
  m.w1.resize(m.input_dim * m.hidden_dim);
  m.b1.assign(m.hidden_dim, 0.0);
  m.w2.resize(m.hidden_dim * m.class_count);
  m.b2.assign(m.class_count, 0.0);

  {
    Rng rng(derive_seed(cfg.seed, "probe-init"));
    const double a1 = std::sqrt(6.0 / double(m.input_dim + m.hidden_dim));
    for (auto& w : m.w1) w = (2.0 * rng.uniform() - 1.0) * a1;
    const double a2 = std::sqrt(6.0 / double(m.hidden_dim + m.class_count));
    for (auto& w : m.w2) w = (2.0 * rng.uniform() - 1.0) * a2;
  }

  std::vector<double> v_w1(m.w1.size(), 0.0), v_b1(m.b1.size(), 0.0),
      v_w2(m.w2.size(), 0.0), v_b2(m.b2.size(), 0.0);
  const std::size_t n = d.features.n_samples;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "probe-epoch", std::uint64_t(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_total = 0.0;
    std::size_t start = 0;
    while (start < n) {
      const std::size_t count =
          std::min<std::size_t>(std::size_t(cfg.batch_size), n - start);
      FeatureMatrix bx(count, d.features.dim);
      std::vector<int> by(count);
      for (std::size_t r = 0; r < count; ++r) {
        const std::size_t src = order[start + r];
        std::copy(d.features.row(src).begin(), d.features.row(src).end(),
                  bx.row(r).begin());
        by[r] = d.labels[src];
      }

      double batch_loss = 0.0;
      const ProbeGradient g =
          probe_gradient(m, bx, by, cfg.weight_decay, &batch_loss);
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorKind::divergence,
                    "train_probe: loss diverged at epoch " +
                        std::to_string(epoch));
      }
      epoch_total += batch_loss * double(count);

      auto step = [&](std::vector<double>& w, std::vector<double>& vel,
                      const std::vector<double>& grad) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          vel[i] = cfg.momentum * vel[i] + grad[i];
          w[i] -= cfg.learning_rate * vel[i];
        }
      };
      step(m.w1, v_w1, g.w1);
      step(m.b1, v_b1, g.b1);
      step(m.w2, v_w2, g.w2);
      step(m.b2, v_b2, g.b2);

      start += count;
    }
    const double mean_loss = epoch_total / double(n);
    if (epoch_losses) epoch_losses->push_back(mean_loss);
    if (!std::isfinite(mean_loss)) {
      throw Error(ErrorKind::divergence,
                  "train_probe: loss diverged at epoch " +
                      std::to_string(epoch));
    }
  }
  return m;
}

FeatureMatrix extract_features(const ProbeModel& m, const FeatureMatrix& f) {
  if (f.dim != m.input_dim) {
    throw Error(ErrorKind::dimension,
                "extract_features: input dim " + std::to_string(f.dim) +
                    " != model dim " + std::to_string(m.input_dim));
  }
  FeatureMatrix out(f.n_samples, m.hidden_dim);
  for (std::size_t i = 0; i < f.n_samples; ++i) {
    forward_hidden(m, f.row(i), out.row(i));
  }
  return out;
}

FeatureMatrix predict_proba(const ProbeModel& m, const FeatureMatrix& f) {
  if (f.dim != m.input_dim) {
    throw Error(ErrorKind::dimension, "predict_proba: input dim mismatch");
  }
  FeatureMatrix out(f.n_samples, m.class_count);
  std::vector<double> hidden(m.hidden_dim);
  for (std::size_t i = 0; i < f.n_samples; ++i) {
    forward_hidden(m, f.row(i), hidden);
    forward_logits(m, hidden, out.row(i));
    softmax_inplace(out.row(i));
  }
  return out;
}

double gradient_check(const ProbeModel& m, const FeatureMatrix& batch_x,
                      std::span<const int> batch_y, std::uint64_t seed,
                      int sampled_params, double weight_decay) {
  if (batch_x.n_samples == 0) {
    throw Error(ErrorKind::infeasible, "gradient_check: empty batch");
  }
  const ProbeGradient g = probe_gradient(m, batch_x, batch_y, weight_decay);

  struct Slot {
    std::vector<double> ProbeModel::*member;
    const std::vector<double> ProbeGradient::*grad;
  };
  const Slot slots[4] = {
      {&ProbeModel::w1, &ProbeGradient::w1},
      {&ProbeModel::b1, &ProbeGradient::b1},
      {&ProbeModel::w2, &ProbeGradient::w2},
      {&ProbeModel::b2, &ProbeGradient::b2},
  };

  std::size_t total = 0;
  for (const auto& s : slots) total += (m.*(s.member)).size();
  const std::size_t want =
      std::min<std::size_t>(std::size_t(std::max(1, sampled_params)), total);

  Rng rng(seed);
  ProbeModel probe = m;  // mutated and restored around each evaluation
  const double eps = 1e-5;
  double worst = 0.0;
  for (std::size_t s = 0; s < want; ++s) {
    std::size_t flat = std::size_t(rng.below(total));
    int slot = 0;
    while (flat >= (m.*(slots[slot].member)).size()) {
      flat -= (m.*(slots[slot].member)).size();
      ++slot;
    }
    double& param = (probe.*(slots[slot].member))[flat];
    const double saved = param;
    param = saved + eps;
    const double up = probe_loss(probe, batch_x, batch_y, weight_decay);
    param = saved - eps;
    const double down = probe_loss(probe, batch_x, batch_y, weight_decay);
    param = saved;

    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = (g.*(slots[slot].grad))[flat];
    const double denom =
        std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

void save_probe(const ProbeModel& m, const std::filesystem::path& path) {
  std::vector<NamedTensor> tensors(4);
  tensors[0] = {"w1", m.input_dim, m.hidden_dim, m.w1};
  tensors[1] = {"b1", 1, m.hidden_dim, m.b1};
  tensors[2] = {"w2", m.hidden_dim, m.class_count, m.w2};
  tensors[3] = {"b2", 1, m.class_count, m.b2};
  save_tensors(tensors, path);
}

ProbeModel load_probe(const std::filesystem::path& path) {
  const auto tensors = load_tensors(path);
  const NamedTensor& w1 = find_tensor(tensors, "w1");
  const NamedTensor& b1 = find_tensor(tensors, "b1");
  const NamedTensor& w2 = find_tensor(tensors, "w2");
  const NamedTensor& b2 = find_tensor(tensors, "b2");
  ProbeModel m;
  m.input_dim = w1.rows;
  m.hidden_dim = w1.cols;
  m.class_count = w2.cols;
  if (b1.cols != m.hidden_dim || w2.rows != m.hidden_dim ||
      b2.cols != m.class_count) {
    throw Error(ErrorKind::format, path.string() + ": inconsistent shapes");
  }
  m.w1 = w1.data;
  m.b1 = b1.data;
  m.w2 = w2.data;
  m.b2 = b2.data;
  return m;
}

}  // namespace refinery
