// Small dense linear algebra kernels: vectors as std::vector<double>, a
// row-major matrix type, and the symmetric Jacobi eigensolver backing the
// orthogonal Procrustes initialization.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sexwes {

using Vec = std::vector<double>;

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double* operator[](std::size_t r) { return a.data() + r * cols; }
  const double* operator[](std::size_t r) const { return a.data() + r * cols; }

  std::span<double> row(std::size_t r) { return {a.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {a.data() + r * cols, cols};
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
    return m;
  }
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);

// y += c * x
void axpy(double c, std::span<const double> x, std::span<double> y);
void scale_inplace(std::span<double> x, double c);

// m (r x c) times v (c) -> r
Vec matvec(const Mat& m, std::span<const double> v);
// m^T (c x r) times v (r) -> c
Vec matvec_transposed(const Mat& m, std::span<const double> v);

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& m);

// m += c * u v^T
void add_outer(Mat& m, double c, std::span<const double> u,
               std::span<const double> v);

// Cyclic Jacobi eigendecomposition of a symmetric matrix s = V diag(w) V^T.
// Eigenpairs are returned sorted by descending eigenvalue; V holds
// eigenvectors as columns.
void jacobi_eigen_symmetric(const Mat& s, Mat& eigvecs, Vec& eigvals);

// Orthogonal polar factor Q of a square matrix m = Q P (P symmetric positive
// definite), computed as m (m^T m)^{-1/2}. m must be nonsingular.
Mat orthogonal_polar_factor(const Mat& m);

// Shortest round-trip decimal rendering of a double (17 significant digits),
// shared by every text artifact writer so chained stages byte-match in-process
// runs.
std::string format_double(double v);

}  // namespace sexwes
