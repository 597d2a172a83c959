#include "nfm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "nfm/errors.hpp"

namespace nfm {

double orient(Eigen::Ref<Vector> v) {
  if (v.size() == 0) return 1.0;
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  if (v(best) < 0) {
    v = -v;
    return -1.0;
  }
  return 1.0;
}

EigenPairs sorted_eigen(const Matrix& sym) {
  if (sym.rows() != sym.cols()) throw DimensionError("sorted_eigen: matrix is not square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw SingularityError("eigendecomposition failed to converge");
  const Index n = sym.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  EigenPairs out{Vector(n), Matrix(n, n)};
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    out.values(i) = es.eigenvalues()(src);
    out.vectors.col(i) = es.eigenvectors().col(src);
    orient(out.vectors.col(i));
  }
  return out;
}

SingularTriplets sorted_svd(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SingularTriplets out{svd.singularValues(), svd.matrixU(), svd.matrixV()};
  for (Index i = 0; i < out.values.size(); ++i) {
    const double sign = orient(out.left.col(i));
    out.right.col(i) *= sign;
  }
  return out;
}

void symmetrize_from_upper(Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = j + 1; i < m.rows(); ++i) m(i, j) = m(j, i);
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

double pearson(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw LengthMismatchError("pearson: series lengths differ");
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double den = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return den > 0 ? ca.dot(cb) / den : 0.0;
}

}  // namespace nfm
