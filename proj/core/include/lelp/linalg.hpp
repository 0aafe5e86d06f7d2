#pragma once

#include <cstdint>
#include <stdexcept>

#include "lelp/matrix.hpp"

namespace lelp::linalg {

// Raised when a class's embedding cloud carries no usable variance.
struct degenerate_data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Modified Gram-Schmidt over the columns of w. Returns a D x K matrix with
// K = rank(w): columns whose residual norm falls below 1e-10 times the
// largest input column norm are dropped. An all-zero input yields K = 0.
Matrix orthonormalize_columns(const Matrix& w);

// h - h q qᵀ for q with orthonormal columns. Zero-width q returns h
// unchanged (the trivial null space is all of R^D).
Matrix nullspace_project(const Matrix& h, const Matrix& q);

struct Pca {
  Vector mean;  // column mean of the input rows
  Matrix dirs;  // s x d; unit-norm rows in descending variance order
  Vector stds;  // per-row sqrt(eigenvalue) of the 1/N sample covariance
};

// Top-s principal directions of the rows of h. Requires n >= 2 and
// s <= min(n - 1, d). Signs are fixed so each direction's largest-magnitude
// entry is positive. Throws degenerate_data_error when the covariance is
// numerically zero.
Pca top_pca(const Matrix& h, std::size_t s);

// Seeded random s x s orthogonal matrix: standard-normal entries,
// Gram-Schmidt, then column sign flips making the diagonal nonnegative.
Matrix random_orthogonal(std::size_t s, std::uint64_t seed);

struct EigenSym {
  Vector values;   // descending
  Matrix vectors;  // row i is the eigenvector for values[i]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Stops when the
// off-diagonal Frobenius mass drops below 1e-12 relative to the matrix norm,
// or after 100 sweeps.
EigenSym eigen_symmetric(const Matrix& a);

}  // namespace lelp::linalg
