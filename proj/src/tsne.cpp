#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sexwes/evaluation.hpp"
#include "sexwes/rng.hpp"

namespace sexwes {

namespace {

// Input affinities by binary search on the per-point bandwidth so that each
// conditional distribution hits the requested perplexity.
std::vector<double> input_affinities(const std::vector<Vec>& x,
                                     double perplexity) {
  const std::size_t n = x.size();
  std::vector<double> sqd(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x[i].size(); ++c) {
        const double d = x[i][c] - x[j][c];
        s += d * d;
      }
      sqd[i * n + j] = sqd[j * n + i] = s;
    }

  const double target_entropy = std::log(perplexity);
  std::vector<double> p(n * n, 0.0);
  std::vector<double> row(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = 1e300;
    for (int it = 0; it < 64; ++it) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * sqd[i * n + j]);
        sum += row[j];
      }
      double entropy = 0.0;
      if (sum > 0.0) {
        for (std::size_t j = 0; j < n; ++j) {
          if (row[j] <= 0.0) continue;
          const double pj = row[j] / sum;
          entropy -= pj * std::log(pj);
        }
      }
      const double diff = entropy - target_entropy;
      if (std::abs(diff) < 1e-7) break;
      if (diff > 0.0) {
        beta_lo = beta;
        beta = beta_hi >= 1e300 ? beta * 2.0 : (beta + beta_hi) / 2.0;
      } else {
        beta_hi = beta;
        beta = beta_lo <= 0.0 ? beta / 2.0 : (beta + beta_lo) / 2.0;
      }
      double check = 0.0;
      for (std::size_t j = 0; j < n; ++j) check += row[j];
      if (check == 0.0) break;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = j == i ? 0.0 : std::exp(-beta * sqd[i * n + j]);
      sum += row[j];
    }
    for (std::size_t j = 0; j < n; ++j)
      p[i * n + j] = sum > 0.0 ? row[j] / sum : 0.0;
  }

  // symmetrize and floor
  std::vector<double> joint(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      joint[i * n + j] =
          std::max((p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n)),
                   1e-12);
  for (std::size_t i = 0; i < n; ++i) joint[i * n + i] = 1e-12;
  return joint;
}

double kl_divergence(const std::vector<double>& p,
                     const std::vector<std::array<double, 2>>& y) {
  const std::size_t n = y.size();
  double qsum = 0.0;
  std::vector<double> qnum(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[i][0] - y[j][0];
      const double dy = y[i][1] - y[j][1];
      const double q = 1.0 / (1.0 + dx * dx + dy * dy);
      qnum[i * n + j] = qnum[j * n + i] = q;
      qsum += 2.0 * q;
    }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p[i * n + j];
      const double qij = std::max(qnum[i * n + j] / qsum, 1e-12);
      kl += pij * std::log(pij / qij);
    }
  return kl;
}

}  // namespace

std::vector<std::array<double, 2>> project_2d(const std::vector<Vec>& vectors,
                                              const TsneConfig& cfg,
                                              double* final_kl,
                                              double* initial_kl) {
  const std::size_t n = vectors.size();
  if (n < 4) throw std::runtime_error("projection needs at least 4 points");
  if (!(cfg.perplexity < static_cast<double>(n - 1) / 3.0))
    throw std::runtime_error("perplexity must be below (n-1)/3 = " +
                             std::to_string((n - 1) / 3.0));
  for (const auto& v : vectors)
    if (v.size() != vectors.front().size())
      throw std::runtime_error("projection inputs differ in dimension");

  const std::vector<double> p = input_affinities(vectors, cfg.perplexity);
  const double learning_rate =
      cfg.learning_rate > 0.0
          ? cfg.learning_rate
          : std::max(static_cast<double>(n) / 12.0, 10.0);

  Rng rng(cfg.seed);
  std::vector<std::array<double, 2>> y(n);
  for (auto& pt : y) {
    pt[0] = 1e-2 * rng.normal();
    pt[1] = 1e-2 * rng.normal();
  }
  std::vector<std::array<double, 2>> velocity(n, {0.0, 0.0});
  std::vector<std::array<double, 2>> gains(n, {1.0, 1.0});

  double best_kl = kl_divergence(p, y);
  if (initial_kl) *initial_kl = best_kl;
  auto best_y = y;

  std::vector<double> qnum(n * n, 0.0);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const double exaggeration =
        iter < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
    const double momentum = iter < cfg.iterations / 2 ? 0.5 : 0.8;

    double qsum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[i][0] - y[j][0];
        const double dy = y[i][1] - y[j][1];
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        qnum[i * n + j] = qnum[j * n + i] = q;
        qsum += 2.0 * q;
      }

    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = qnum[i * n + j];
        const double qij = std::max(q / qsum, 1e-12);
        const double coeff = 4.0 * (exaggeration * p[i * n + j] - qij) * q;
        gx += coeff * (y[i][0] - y[j][0]);
        gy += coeff * (y[i][1] - y[j][1]);
      }
      for (int c = 0; c < 2; ++c) {
        const double g = c == 0 ? gx : gy;
        gains[i][c] = (g > 0.0) == (velocity[i][c] > 0.0)
                          ? std::max(gains[i][c] * 0.8, 0.01)
                          : gains[i][c] + 0.2;
        velocity[i][c] = momentum * velocity[i][c] - learning_rate * gains[i][c] * g;
        y[i][c] += velocity[i][c];
      }
    }

    if (iter >= cfg.exaggeration_iters) {
      const double kl = kl_divergence(p, y);
      if (kl < best_kl) {
        best_kl = kl;
        best_y = y;
      }
    }
  }

  if (final_kl) *final_kl = best_kl;
  return best_y;
}

}  // namespace sexwes
