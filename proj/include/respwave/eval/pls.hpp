#pragma once

// PLS2 regression fitted with NIPALS on mean-centred blocks. The baseline maps a
// normalised 288-sample PPG window to a 288-sample respiratory estimate.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"

namespace respwave::eval {

struct PLSModel {
  std::size_t n_components = 0;  // components actually extracted
  Eigen::RowVectorXd x_mean;
  Eigen::RowVectorXd y_mean;
  Eigen::MatrixXd weights;       // p x A  (W)
  Eigen::MatrixXd x_loadings;    // p x A  (P)
  Eigen::MatrixXd y_loadings;    // q x A  (C)
  Eigen::MatrixXd coefficients;  // p x q  (B = W (P'W)^-1 C')
  std::vector<std::string> warnings;
};

struct PLSOptions {
  std::size_t n_components = 25;
  std::size_t max_iterations = 1000;
  double tolerance = 1e-12;
};

inline PLSModel pls_train(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const PLSOptions& opt = {}) {
  const auto n = X.rows();
  if (n != Y.rows()) throw ShapeError("pls_train: X and Y row counts differ");
  if (!X.allFinite() || !Y.allFinite()) throw ParameterError("pls_train: non-finite values");
  if (opt.n_components == 0) throw ParameterError("pls_train: need at least one component");
  if (static_cast<std::size_t>(n) <= opt.n_components)
    throw ParameterError("pls_train: need more rows (" + std::to_string(n) + ") than components (" +
                         std::to_string(opt.n_components) + ")");

  PLSModel m;
  m.x_mean = X.colwise().mean();
  m.y_mean = Y.colwise().mean();
  Eigen::MatrixXd E = X.rowwise() - m.x_mean;
  Eigen::MatrixXd F = Y.rowwise() - m.y_mean;
  const double x_scale = std::max(1.0, E.norm());

  const auto p = X.cols(), q = Y.cols();
  const auto A = static_cast<Eigen::Index>(opt.n_components);
  Eigen::MatrixXd W(p, A), P(p, A), C(q, A);
  Eigen::Index a = 0;
  for (; a < A; ++a) {
    Eigen::Index start_col = 0;
    const double y_ss = F.colwise().squaredNorm().maxCoeff(&start_col);
    if (!(y_ss > 0.0)) {
      m.warnings.push_back("PLS stopped after " + std::to_string(a) + " components: Y residual is zero");
      break;
    }
    Eigen::VectorXd u = F.col(start_col);
    Eigen::VectorXd t = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w, c;
    for (std::size_t it = 0; it < opt.max_iterations; ++it) {
      w = E.transpose() * u;
      const double wn = w.norm();
      if (!(wn > 0.0)) break;
      w /= wn;
      Eigen::VectorXd t_new = E * w;
      c = F.transpose() * t_new / t_new.squaredNorm();
      u = F * c / c.squaredNorm();
      const double change = (t_new - t).norm();
      t = std::move(t_new);
      if (change <= opt.tolerance * t.norm()) break;
    }
    if (!(t.norm() >= 1e-12 * x_scale) || !(w.size() == p)) {
      m.warnings.push_back("PLS truncated at " + std::to_string(a) + " components: score norm below 1e-12");
      break;
    }
    const double tt = t.squaredNorm();
    c = F.transpose() * t / tt;
    Eigen::VectorXd pl = E.transpose() * t / tt;
    E.noalias() -= t * pl.transpose();
    F.noalias() -= t * c.transpose();
    W.col(a) = w;
    P.col(a) = pl;
    C.col(a) = c;
  }
  m.n_components = static_cast<std::size_t>(a);
  m.weights = W.leftCols(a);
  m.x_loadings = P.leftCols(a);
  m.y_loadings = C.leftCols(a);
  if (a == 0) {
    m.coefficients = Eigen::MatrixXd::Zero(p, q);
  } else {
    const Eigen::MatrixXd PtW = m.x_loadings.transpose() * m.weights;
    m.coefficients = m.weights * PtW.partialPivLu().solve(m.y_loadings.transpose());
  }
  return m;
}

inline Eigen::MatrixXd pls_predict(const PLSModel& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.x_mean.size()) throw ShapeError("pls_predict: input width does not match the model");
  return ((X.rowwise() - m.x_mean) * m.coefficients).rowwise() + m.y_mean;
}

inline std::vector<double> pls_predict(const PLSModel& m, std::span<const double> x) {
  Eigen::RowVectorXd row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd y = pls_predict(m, Eigen::MatrixXd(row));
  return {y.data(), y.data() + y.size()};
}

/// Stacks equally sized rows into a matrix.
inline Eigen::MatrixXd stack_rows(const std::vector<std::span<const double>>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw ShapeError("stack_rows: ragged rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return M;
}

}  // namespace respwave::eval
