#include "failsearch/error.hpp"
#include "failsearch/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace failsearch::surrogate {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// Cached train-mode activations of one hidden layer.
struct LayerCache {
  Matrix input;
  Matrix xhat;  // normalized pre-activation (batchnorm) or raw pre-activation
  std::vector<double> inv_std;
  Matrix act;   // tanh output before dropout
  Matrix mask;  // inverted-dropout multipliers, empty when dropout is off
};

struct Grads {
  std::vector<Matrix> w;
  std::vector<std::vector<double>> b, gamma, beta;
  Matrix out_w;
  std::vector<double> out_b;

  explicit Grads(const Model& m) {
    for (const auto& h : m.hidden) {
      w.emplace_back(h.weight.rows, h.weight.cols);
      b.emplace_back(h.bias.size(), 0.0);
      gamma.emplace_back(h.gamma.size(), 0.0);
      beta.emplace_back(h.beta.size(), 0.0);
    }
    out_w = Matrix(m.out_weight.rows, m.out_weight.cols);
    out_b.assign(2, 0.0);
  }
};

double train_step(Model& m, const Matrix& x, const std::vector<int>& y, const data::ClassWeights& cw, double lr,
                  Rng& rng) {
  const std::size_t n = x.rows;
  const double p_drop = m.arch.effective_dropout();
  std::vector<LayerCache> cache(m.hidden.size());

  Matrix h = x;
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    auto& layer = m.hidden[l];
    auto& c = cache[l];
    c.input = h;
    Matrix z;
    kernels::affine(h, layer.weight, layer.bias, z);
    const std::size_t units = z.cols;
    c.xhat = Matrix(n, units);
    c.act = Matrix(n, units);
    if (m.arch.batchnorm) {
      c.inv_std.assign(units, 0.0);
      for (std::size_t u = 0; u < units; ++u) {
        double mu = 0.0;
        for (std::size_t r = 0; r < n; ++r) mu += z(r, u);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (z(r, u) - mu) * (z(r, u) - mu);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + kBnEps);
        c.inv_std[u] = inv;
        for (std::size_t r = 0; r < n; ++r) {
          c.xhat(r, u) = (z(r, u) - mu) * inv;
          c.act(r, u) = std::tanh(layer.gamma[u] * c.xhat(r, u) + layer.beta[u]);
        }
        const double unbiased = n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1) : var;
        layer.running_mean[u] = (1.0 - kBnMomentum) * layer.running_mean[u] + kBnMomentum * mu;
        layer.running_var[u] = (1.0 - kBnMomentum) * layer.running_var[u] + kBnMomentum * unbiased;
      }
    } else {
      c.xhat = z;
      for (std::size_t i = 0; i < z.data.size(); ++i) c.act.data[i] = std::tanh(z.data[i]);
    }
    h = c.act;
    if (p_drop > 0.0) {
      c.mask = Matrix(n, units);
      const double keep = 1.0 / (1.0 - p_drop);
      for (std::size_t i = 0; i < h.data.size(); ++i) {
        c.mask.data[i] = bernoulli(rng, p_drop) ? 0.0 : keep;
        h.data[i] *= c.mask.data[i];
      }
    }
  }

  Matrix logits;
  kernels::affine(h, m.out_weight, m.out_bias, logits);

  double total_w = 0.0;
  for (std::size_t r = 0; r < n; ++r) total_w += y[r] == 1 ? cw.w1 : cw.w0;
  double loss = 0.0;
  Matrix dlogits(n, 2);
  for (std::size_t r = 0; r < n; ++r) {
    const double l0 = logits(r, 0), l1 = logits(r, 1);
    const double mx = std::max(l0, l1);
    const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
    const double wr = (y[r] == 1 ? cw.w1 : cw.w0) / total_w;
    loss += wr * (lse - (y[r] == 1 ? l1 : l0));
    const double p0 = std::exp(l0 - lse), p1 = std::exp(l1 - lse);
    dlogits(r, 0) = wr * (p0 - (y[r] == 0 ? 1.0 : 0.0));
    dlogits(r, 1) = wr * (p1 - (y[r] == 1 ? 1.0 : 0.0));
  }

  Grads g(m);
  kernels::affine_backward_params(dlogits, h, g.out_w, g.out_b);
  Matrix dh;
  kernels::affine_backward_input(dlogits, m.out_weight, dh);

  for (std::size_t l = m.hidden.size(); l-- > 0;) {
    const auto& layer = m.hidden[l];
    const auto& c = cache[l];
    const std::size_t units = c.act.cols;
    if (!c.mask.data.empty())
      for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] *= c.mask.data[i];
    Matrix dz(n, units);
    for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] = dh.data[i] * (1.0 - c.act.data[i] * c.act.data[i]);
    if (m.arch.batchnorm) {
      for (std::size_t u = 0; u < units; ++u) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          sum_dy += dz(r, u);
          sum_dy_xhat += dz(r, u) * c.xhat(r, u);
        }
        g.beta[l][u] = sum_dy;
        g.gamma[l][u] = sum_dy_xhat;
        // d xhat = dy * gamma; fold gamma into the standard batchnorm backward.
        const double k = layer.gamma[u] * c.inv_std[u] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
          dz(r, u) = k * (static_cast<double>(n) * dz(r, u) - sum_dy - c.xhat(r, u) * sum_dy_xhat);
      }
    }
    kernels::affine_backward_params(dz, c.input, g.w[l], g.b[l]);
    if (l > 0) kernels::affine_backward_input(dz, layer.weight, dh);
  }

  auto step = [lr](std::vector<double>& p, const std::vector<double>& d) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * d[i];
  };
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    auto& layer = m.hidden[l];
    step(layer.weight.data, g.w[l].data);
    step(layer.bias, g.b[l]);
    if (m.arch.batchnorm) {
      step(layer.gamma, g.gamma[l]);
      step(layer.beta, g.beta[l]);
    }
  }
  step(m.out_weight.data, g.out_w.data);
  step(m.out_bias, g.out_b);
  return loss;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(x.row(rows[i]).begin(), x.cols, out.row(i).begin());
  return out;
}

}  // namespace

Matrix features_of(const data::InteractionDataset& d) {
  const std::size_t w = d.schema()->encoded_width();
  Matrix x(d.size(), w);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto f = config::encode(d[i].config);
    std::copy(f.begin(), f.end(), x.row(i).begin());
  }
  return x;
}

Model train(const data::InteractionDataset& train_set, const data::InteractionDataset& val_set,
            const Architecture& arch, const TrainingConfig& cfg) {
  return train(features_of(train_set), train_set.labels(), features_of(val_set), val_set.labels(), arch, cfg);
}

Model train(const Matrix& x_train, const std::vector<int>& y_train, const Matrix& x_val,
            const std::vector<int>& y_val, const Architecture& arch, const TrainingConfig& cfg) {
  arch.check();
  if (!(cfg.learning_rate > 0.0) || cfg.epochs < 0 || cfg.batch_size == 0 || cfg.patience < 1 ||
      !(cfg.weights.w0 > 0.0) || !(cfg.weights.w1 > 0.0))
    throw ValidationError("invalid training configuration");
  if (x_train.cols != arch.input_width || (x_val.rows > 0 && x_val.cols != arch.input_width))
    throw SchemaMismatch("feature width does not match the architecture");
  if (y_train.size() != x_train.rows || y_val.size() != x_val.rows)
    throw ValidationError("feature and label counts differ");
  const auto positives = std::count(y_train.begin(), y_train.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(y_train.size()))
    throw DegenerateData("training set needs both classes");

  Rng rng(cfg.seed);
  Model m = Model::initialize(arch, rng);

  const std::size_t n = x_train.rows, d = x_train.cols;
  for (std::size_t k = 0; k < d; ++k) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += x_train(r, k);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (x_train(r, k) - mu) * (x_train(r, k) - mu);
    const double sd = std::sqrt(var / static_cast<double>(n));
    m.input_mean[k] = mu;
    m.input_scale[k] = sd > 1e-12 ? sd : 1.0;
  }
  Matrix xs(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < d; ++k) xs(r, k) = (x_train(r, k) - m.input_mean[k]) / m.input_scale[k];

  // Without a validation split the checkpoint falls back to the training loss.
  const bool has_val = x_val.rows > 0;
  const Matrix& xv = has_val ? x_val : x_train;
  const std::vector<int>& yv = has_val ? y_val : y_train;

  m.info.seed = cfg.seed;
  double v0 = m.loss(xv, yv, cfg.weights);
  if (!std::isfinite(v0)) throw Diverged(0);
  m.info.val_loss.push_back(v0);
  Model best = m;
  double best_loss = v0;
  int best_epoch = 0;
  int stale = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  int epoch = 0;
  while (epoch < cfg.epochs) {
    ++epoch;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n;) {
      std::size_t end = std::min(n, start + cfg.batch_size);
      // A lone trailing sample would give batchnorm a zero variance.
      if (n - end == 1) end = n;
      std::span<const std::size_t> rows(order.data() + start, end - start);
      const Matrix xb = gather_rows(xs, rows);
      std::vector<int> yb(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) yb[i] = y_train[rows[i]];
      const double l = train_step(m, xb, yb, cfg.weights, cfg.learning_rate, rng);
      if (!std::isfinite(l)) throw Diverged(epoch);
      epoch_loss += l * static_cast<double>(rows.size());
      seen += rows.size();
      start = end;
    }
    m.info.train_loss.push_back(epoch_loss / static_cast<double>(seen));
    const double v = m.loss(xv, yv, cfg.weights);
    if (!std::isfinite(v)) throw Diverged(epoch);
    m.info.val_loss.push_back(v);
    if (v < best_loss) {
      best_loss = v;
      best_epoch = epoch;
      best = m;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  best.info = m.info;
  best.info.epochs_run = epoch;
  best.info.best_epoch = best_epoch;
  best.info.best_val_loss = best_loss;
  return best;
}

}  // namespace failsearch::surrogate
