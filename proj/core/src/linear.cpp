#include "refinery/linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "refinery/io.hpp"

namespace refinery {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-m)) without overflow.
double logistic_loss(double margin) {
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double dot_row(std::span<const double> w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

}  // namespace

double linear_objective(std::span<const double> w, double b,
                        const FeatureMatrix& x, std::span<const int> y,
                        LossKind loss, double l2) {
  const std::size_t n = x.n_samples;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double margin = double(y[i]) * (dot_row(w, x.row(i)) + b);
    total += loss == LossKind::logistic ? logistic_loss(margin)
                                        : std::max(0.0, 1.0 - margin);
  }
  double reg = 0.0;
  for (double wj : w) reg += wj * wj;
  return total / double(n) + 0.5 * l2 * reg;
}

void linear_gradient(std::span<const double> w, double b,
                     const FeatureMatrix& x, std::span<const int> y,
                     LossKind loss, double l2, std::span<double> grad_w,
                     double& grad_b) {
  const std::size_t n = x.n_samples;
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  grad_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    const double yi = double(y[i]);
    const double margin = yi * (dot_row(w, xi) + b);
    double coef;
    if (loss == LossKind::logistic) {
      coef = -yi * sigmoid(-margin);
    } else {
      coef = margin < 1.0 ? -yi : 0.0;
    }
    for (std::size_t j = 0; j < w.size(); ++j) grad_w[j] += coef * xi[j];
    grad_b += coef;
  }
  const double inv_n = 1.0 / double(n);
  for (std::size_t j = 0; j < w.size(); ++j) {
    grad_w[j] = grad_w[j] * inv_n + l2 * w[j];
  }
  grad_b *= inv_n;
}

namespace {

BinaryLinearModel train_on_batch(const FeatureMatrix& x,
                                 const std::vector<int>& y,
                                 const LinearTrainOptions& opt) {
  const std::size_t dim = x.dim;
  BinaryLinearModel m;
  m.w.assign(dim, 0.0);
  m.b = 0.0;
  m.loss_kind = opt.loss;
  m.l2 = opt.l2;

  std::vector<double> grad_w(dim, 0.0);
  double grad_b = 0.0;
  double lr = opt.lr;
  const double lr_cap = opt.lr * 1024.0;
  double obj = linear_objective(m.w, m.b, x, y, opt.loss, opt.l2);

  std::vector<double> trial_w(dim, 0.0);
  for (int it = 0; it < opt.iters; ++it) {
    linear_gradient(m.w, m.b, x, y, opt.loss, opt.l2, grad_w, grad_b);
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      for (std::size_t j = 0; j < dim; ++j) {
        trial_w[j] = m.w[j] - lr * grad_w[j];
      }
      const double trial_b = m.b - lr * grad_b;
      const double trial_obj =
          linear_objective(trial_w, trial_b, x, y, opt.loss, opt.l2);
      if (!std::isfinite(trial_obj)) {
        throw Error(ErrorKind::divergence,
                    "linear training diverged at iteration " +
                        std::to_string(it));
      }
      if (trial_obj <= obj) {
        m.w.swap(trial_w);
        m.b = trial_b;
        obj = trial_obj;
        accepted = true;
        // accepted steps earn the step size back
        lr = std::min(lr * 2.0, lr_cap);
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;  // step proposals exhausted; at a (sub)optimum
  }
  return m;
}

}  // namespace

BinaryLinearModel train_binary(const FeatureMatrix& positives,
                               const FeatureMatrix& negatives,
                               const LinearTrainOptions& opt) {
  if (positives.n_samples == 0 || negatives.n_samples == 0) {
    throw Error(ErrorKind::infeasible,
                "train_binary: both sample sets must be non-empty");
  }
  if (positives.dim != negatives.dim) {
    throw Error(ErrorKind::dimension,
                "train_binary: positives dim " +
                    std::to_string(positives.dim) + " != negatives dim " +
                    std::to_string(negatives.dim));
  }
  const std::size_t n = positives.n_samples + negatives.n_samples;
  FeatureMatrix x(n, positives.dim);
  std::copy(positives.values.begin(), positives.values.end(),
            x.values.begin());
  std::copy(negatives.values.begin(), negatives.values.end(),
            x.values.begin() + std::ptrdiff_t(positives.values.size()));
  std::vector<int> y(n, 1);
  std::fill(y.begin() + std::ptrdiff_t(positives.n_samples), y.end(), -1);
  return train_on_batch(x, y, opt);
}

std::vector<double> score(const BinaryLinearModel& m, const FeatureMatrix& f) {
  if (f.dim != m.w.size()) {
    throw Error(ErrorKind::dimension,
                "score: feature dim " + std::to_string(f.dim) +
                    " != model dim " + std::to_string(m.w.size()));
  }
  std::vector<double> out(f.n_samples, 0.0);
  for (std::size_t i = 0; i < f.n_samples; ++i) {
    const double z = dot_row(m.w, f.row(i)) + m.b;
    out[i] = m.loss_kind == LossKind::logistic ? sigmoid(z) : z;
  }
  return out;
}

OvaModel train_ova(const LabeledDataset& d, const LinearTrainOptions& opt) {
  if (d.class_count < 2) {
    throw Error(ErrorKind::infeasible, "train_ova: need >= 2 classes");
  }
  validate(d);
  OvaModel ova;
  ova.class_count = d.class_count;
  ova.models.resize(d.class_count);
  const std::size_t n = d.features.n_samples;
  std::vector<int> y(n, -1);
  for (int c = 0; c < d.class_count; ++c) {
    for (std::size_t i = 0; i < n; ++i) y[i] = d.labels[i] == c ? 1 : -1;
    ova.models[c] = train_on_batch(d.features, y, opt);
  }
  return ova;
}

std::vector<int> predict_ova(const OvaModel& m, const FeatureMatrix& f) {
  std::vector<std::vector<double>> scores(m.models.size());
  for (std::size_t c = 0; c < m.models.size(); ++c) {
    scores[c] = score(m.models[c], f);
  }
  std::vector<int> pred(f.n_samples, 0);
  for (std::size_t i = 0; i < f.n_samples; ++i) {
    int best = 0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < scores.size(); ++c) {
      if (scores[c][i] > best_s) {
        best_s = scores[c][i];
        best = int(c);
      }
    }
    pred[i] = best;
  }
  return pred;
}

std::size_t nearest_neighbor(std::span<const double> query,
                             const FeatureMatrix& pool) {
  if (pool.n_samples == 0) {
    throw Error(ErrorKind::infeasible, "nearest_neighbor: empty pool");
  }
  if (pool.dim != query.size()) {
    throw Error(ErrorKind::dimension, "nearest_neighbor: dim mismatch");
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pool.n_samples; ++i) {
    const double d = squared_distance(query, pool.row(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

void save_linear_model(const BinaryLinearModel& m,
                       const std::filesystem::path& path) {
  std::vector<NamedTensor> tensors(3);
  tensors[0] = {"w", 1, m.w.size(), m.w};
  tensors[1] = {"b", 1, 1, {m.b}};
  tensors[2] = {"meta", 1, 2,
                {m.loss_kind == LossKind::logistic ? 0.0 : 1.0, m.l2}};
  save_tensors(tensors, path);
}

BinaryLinearModel load_linear_model(const std::filesystem::path& path) {
  const auto tensors = load_tensors(path);
  BinaryLinearModel m;
  m.w = find_tensor(tensors, "w").data;
  m.b = find_tensor(tensors, "b").data.at(0);
  const auto& meta = find_tensor(tensors, "meta").data;
  m.loss_kind = meta.at(0) == 0.0 ? LossKind::logistic : LossKind::hinge;
  m.l2 = meta.at(1);
  return m;
}

}  // namespace refinery
