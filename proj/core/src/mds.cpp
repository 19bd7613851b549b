#include "climsom/mds.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "climsom/error.hpp"

namespace climsom {

std::vector<double> classical_mds(std::span<double const> distances, std::size_t n,
                                  std::size_t dims) {
  if (n == 0) invalid("empty distance matrix");
  if (distances.size() != n * n) invalid("distance matrix must be n x n");
  if (dims == 0) invalid("dims must be >= 1");

  auto const N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd sq(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      double const d = distances[i * n + j];
      sq(i, j) = d * d;
    }
  }
  // B = -1/2 J D^2 J
  Eigen::VectorXd const row_mean = sq.rowwise().mean();
  Eigen::VectorXd const col_mean = sq.colwise().mean().transpose();
  double const grand = sq.mean();
  Eigen::MatrixXd b(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      b(i, j) = -0.5 * (sq(i, j) - row_mean(i) - col_mean(j) + grand);
    }
  }
  b = 0.5 * (b + b.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) fail(ErrorKind::kDataError, "MDS eigen-solve failed");
  auto const& values = solver.eigenvalues();    // ascending
  auto const& vectors = solver.eigenvectors();

  std::vector<double> out(n * dims, 0.0);
  for (std::size_t k = 0; k < dims && k < n; ++k) {
    auto const col = N - 1 - static_cast<Eigen::Index>(k);
    double const lambda = values(col);
    if (!(lambda > 0)) continue;
    double const scale = std::sqrt(lambda);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < N; ++i) {
      if (std::abs(vectors(i, col)) > std::abs(vectors(arg, col))) arg = i;
    }
    double const sign = vectors(arg, col) < 0 ? -1.0 : 1.0;
    for (Eigen::Index i = 0; i < N; ++i) out[i * dims + k] = sign * scale * vectors(i, col);
  }
  return out;
}

}  // namespace climsom
