#include "nfm/linfactor.hpp"

#include <cmath>

#include "nfm/errors.hpp"
#include "nfm/linalg.hpp"
#include "nfm/optimize.hpp"

namespace nfm {

namespace {

constexpr double kResidualVarianceFloor = 1e-6;

Matrix orthonormal_row_basis(const Matrix& weights, const char* which) {
  // Columns of Q span the row space of W.
  Eigen::HouseholderQR<Matrix> qr(weights.transpose());
  const Matrix r = qr.matrixQR().topRows(weights.rows()).triangularView<Eigen::Upper>();
  const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
  for (Index k = 0; k < weights.rows(); ++k)
    if (std::abs(r(k, k)) <= 1e-12 * scale)
      throw RankError(std::string("subspace_distance: ") + which + " weights have rank < M");
  return qr.householderQ() * Matrix::Identity(weights.cols(), weights.rows());
}

}  // namespace

Vector LinearFactorModel::residual_variances() const {
  return Vector::Ones(weights.cols()) - weights.colwise().squaredNorm().transpose();
}

Matrix sample_correlation(const Matrix& returns) {
  Matrix c = Matrix::Zero(returns.cols(), returns.cols());
  c.selfadjointView<Eigen::Upper>().rankUpdate(returns.transpose(), 1.0 / static_cast<double>(returns.rows()));
  symmetrize_from_upper(c);
  return c;
}

LinearFactorModel pca_prior(const Matrix& correlation, Index n_factors) {
  if (n_factors < 1) throw RankError("pca_prior: M must be positive");
  if (n_factors > correlation.rows())
    throw RankError("pca_prior: M = " + std::to_string(n_factors) + " exceeds N = " +
                    std::to_string(correlation.rows()));
  const EigenPairs eig = sorted_eigen(correlation);
  LinearFactorModel model{Matrix(n_factors, correlation.cols())};
  for (Index k = 0; k < n_factors; ++k)
    model.weights.row(k) = std::sqrt(std::max(eig.values(k), 0.0)) * eig.vectors.col(k).transpose();
  return model;
}

LinearFactorModel pca_prior(const ReturnPanel& panel, Index n_factors) {
  return pca_prior(sample_correlation(panel.returns), n_factors);
}

double offdiag_loss(const Matrix& target, const Matrix& weights, Matrix* grad) {
  Matrix diff = weights.transpose() * weights - target;
  diff.diagonal().setZero();
  if (grad) *grad = 4.0 * weights * diff;
  return diff.squaredNorm();
}

double variance_barrier(const Matrix& weights, Matrix* grad) {
  double total = 0.0;
  for (Index i = 0; i < weights.cols(); ++i) {
    const double excess = weights.col(i).squaredNorm() - 1.0;
    if (excess <= 0.0) continue;
    total += excess * excess;
    if (grad) grad->col(i) += 4.0 * excess * weights.col(i);
  }
  return total;
}

LinearCalibration calibrate_weights(const Matrix& correlation, Index n_factors,
                                    const LinearCalibrationOptions& options) {
  if (correlation.rows() != correlation.cols())
    throw DimensionError("calibrate_weights: correlation must be square");
  const LinearFactorModel prior = pca_prior(correlation, n_factors);
  const Index M = n_factors;
  const Index N = correlation.cols();
  const Matrix start = options.warm_start ? options.warm_start->weights : prior.weights;
  if (start.rows() != M || start.cols() != N)
    throw DimensionError("calibrate_weights: warm start has the wrong shape");

  const double mu = options.barrier_weight;
  Objective objective = [&](const Vector& x, Vector& g) {
    const Eigen::Map<const Matrix> w(x.data(), M, N);
    Matrix grad;
    double f = offdiag_loss(correlation, w, &grad);
    Matrix bgrad = Matrix::Zero(M, N);
    f += mu * variance_barrier(w, &bgrad);
    grad += mu * bgrad;
    g = Eigen::Map<const Vector>(grad.data(), grad.size());
    return f;
  };

  LbfgsOptions lopts;
  lopts.rel_tolerance = options.rel_tolerance;
  lopts.max_iterations = options.max_iterations;
  const Vector x0 = Eigen::Map<const Vector>(start.data(), start.size());
  const LbfgsResult res = minimize_lbfgs(objective, x0, lopts);

  LinearCalibration out;
  out.prior_loss = offdiag_loss(correlation, prior.weights);
  out.model.weights = Eigen::Map<const Matrix>(res.x.data(), M, N);
  out.loss = offdiag_loss(correlation, out.model.weights);
  out.iterations = res.iterations;
  out.converged = res.converged;
  if (out.loss > out.prior_loss) {
    out.model = prior;
    out.loss = out.prior_loss;
  }
  return out;
}

LinearCalibration calibrate_weights(const ReturnPanel& panel, Index n_factors,
                                    const LinearCalibrationOptions& options) {
  return calibrate_weights(sample_correlation(panel.returns), n_factors, options);
}

FactorSeries extract_series(const Matrix& returns, const LinearFactorModel& model) {
  const Matrix& w = model.weights;
  if (w.cols() != returns.cols())
    throw DimensionError("extract_series: model has " + std::to_string(w.cols()) +
                         " assets, panel has " + std::to_string(returns.cols()));
  const Vector inv_v = model.residual_variances().cwiseMax(kResidualVarianceFloor).cwiseInverse();
  const Matrix wv = w * inv_v.asDiagonal();  // M x N
  const Matrix normal = wv * w.transpose();  // M x M
  Eigen::LDLT<Matrix> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw SingularityError("extract_series: W diag(1/v) W^T is not invertible");
  FactorSeries out;
  // Each row solves F_t = (W V^-1 W^T)^-1 W V^-1 R_t^T; rows are independent.
  out.factors = ldlt.solve(wv * returns.transpose()).transpose();
  out.residuals = returns - out.factors * w;
  return out;
}

FactorSeries extract_series(const ReturnPanel& panel, const LinearFactorModel& model) {
  return extract_series(panel.returns, model);
}

Matrix model_correlation(const LinearFactorModel& model) {
  Matrix c = model.weights.transpose() * model.weights;
  symmetrize_from_upper(c);
  c.diagonal().setOnes();
  return c;
}

double subspace_distance(const LinearFactorModel& model, const LinearFactorModel& prior) {
  if (model.weights.rows() != prior.weights.rows() || model.weights.cols() != prior.weights.cols())
    throw DimensionError("subspace_distance: models differ in M or N");
  if (model.n_factors() > model.n_assets()) throw RankError("subspace_distance: M exceeds N");
  const Matrix qm = orthonormal_row_basis(model.weights, "model");
  const Matrix qp = orthonormal_row_basis(prior.weights, "prior");
  const double det = std::abs((qm.transpose() * qp).determinant());
  return std::max(0.0, -std::log(det) / static_cast<double>(model.n_factors()));
}

}  // namespace nfm
