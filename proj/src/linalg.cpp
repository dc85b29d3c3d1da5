#include "sexwes/linalg.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sexwes {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0)
    throw std::runtime_error("cosine undefined for zero vector");
  return dot(a, b) / (na * nb);
}

bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

void axpy(double c, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

void scale_inplace(std::span<double> x, double c) {
  for (double& v : x) v *= c;
}

Vec matvec(const Mat& m, std::span<const double> v) {
  Vec out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) out[r] = dot(m.row(r), v);
  return out;
}

Vec matvec_transposed(const Mat& m, std::span<const double> v) {
  Vec out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m[r];
    const double vr = v[r];
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += row[c] * vr;
  }
  return out;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw std::runtime_error("matmul shape mismatch");
  Mat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a[i][k];
      if (aik == 0.0) continue;
      const double* brow = b[k];
      double* orow = out[i];
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Mat transpose(const Mat& m) {
  Mat out(m.cols, m.rows);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out[c][r] = m[r][c];
  return out;
}

void add_outer(Mat& m, double c, std::span<const double> u,
               std::span<const double> v) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double cu = c * u[i];
    if (cu == 0.0) continue;
    double* row = m[i];
    for (std::size_t j = 0; j < v.size(); ++j) row[j] += cu * v[j];
  }
}

void jacobi_eigen_symmetric(const Mat& s, Mat& eigvecs, Vec& eigvals) {
  if (s.rows != s.cols) throw std::runtime_error("jacobi: matrix not square");
  const std::size_t n = s.rows;
  Mat a = s;
  Mat v = Mat::identity(n);

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-24) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p][q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - sn * akq;
          a[k][q] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - sn * aqk;
          a[q][k] = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - sn * vkq;
          v[k][q] = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a[order[j]][order[j]] > a[order[i]][order[i]])
        std::swap(order[i], order[j]);

  eigvals.assign(n, 0.0);
  eigvecs = Mat(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    eigvals[i] = a[order[i]][order[i]];
    for (std::size_t k = 0; k < n; ++k) eigvecs[k][i] = v[k][order[i]];
  }
}

Mat orthogonal_polar_factor(const Mat& m) {
  if (m.rows != m.cols) throw std::runtime_error("polar factor: not square");
  const std::size_t n = m.rows;
  const Mat mtm = matmul(transpose(m), m);
  Mat v;
  Vec lam;
  jacobi_eigen_symmetric(mtm, v, lam);

  // (m^T m)^{-1/2} = v diag(1/sqrt(lambda)) v^T
  Mat inv_sqrt(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = lam[i];
    if (l <= 1e-12)
      throw std::runtime_error("polar factor: matrix numerically singular");
    const double is = 1.0 / std::sqrt(l);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        inv_sqrt[r][c] += v[r][i] * is * v[c][i];
  }
  return matmul(m, inv_sqrt);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace sexwes
