#pragma once

#include "nfm/types.hpp"

namespace nfm {

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
struct EigenPairs {
  Vector values;
  Matrix vectors;  ///< column i pairs with values(i)
};

/// Singular triplets, singular values in descending order.
struct SingularTriplets {
  Vector values;
  Matrix left;   ///< columns are left singular vectors
  Matrix right;  ///< columns are right singular vectors
};

/// Flips v so that its largest-magnitude component is positive (lowest index wins ties).
/// Returns the applied sign.
double orient(Eigen::Ref<Vector> v);

/// Symmetric eigendecomposition. Equal eigenvalues keep the solver's column order;
/// every eigenvector is oriented by orient().
EigenPairs sorted_eigen(const Matrix& sym);

/// Thin SVD with the left vectors oriented by orient() and the right vectors flipped to match.
SingularTriplets sorted_svd(const Matrix& m);

/// Copies the upper triangle onto the lower one.
void symmetrize_from_upper(Matrix& m);

/// Cosine of the angle between two vectors (0 when either is zero).
double cosine_similarity(const Vector& a, const Vector& b);

/// Pearson correlation of two equal-length series.
double pearson(const Vector& a, const Vector& b);

}  // namespace nfm
