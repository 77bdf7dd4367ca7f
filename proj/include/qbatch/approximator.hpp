#pragma once

// Standardized degree-2 polynomial ridge regression. The explicit feature map
// spans the same function class as a second-order polynomial kernel, so the
// fit is a small closed-form solve instead of a kernel machine.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qbatch/common.hpp"

namespace qbatch {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t max_input_dim = 16;

struct Scaler {
  static constexpr double std_floor = 1e-12;
  std::vector<double> means;
  std::vector<double> stds;

  std::size_t dim() const { return means.size(); }
};

/// Column means and population standard deviations, floored at std_floor.
inline Scaler fit_scaler(const Matrix& X) {
  if (X.rows() < 1) throw DomainError("fit_scaler: need at least one row");
  Scaler s;
  const auto m = static_cast<double>(X.rows());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    double mean = 0.0;
    for (Eigen::Index r = 0; r < X.rows(); ++r) mean += X(r, c);
    mean /= m;
    double var = 0.0;
    for (Eigen::Index r = 0; r < X.rows(); ++r) var += (X(r, c) - mean) * (X(r, c) - mean);
    s.means.push_back(mean);
    s.stds.push_back(std::max(std::sqrt(var / m), Scaler::std_floor));
  }
  return s;
}

inline std::size_t poly2_feature_count(std::size_t d) { return (d + 1) * (d + 2) / 2; }

/// Features in the order [1, x_1..x_d, x_i*x_j for i <= j (row-major over i)].
inline void poly2_features_into(std::span<const double> x, std::span<double> out) {
  const std::size_t d = x.size();
  std::size_t n = 0;
  out[n++] = 1.0;
  for (std::size_t i = 0; i < d; ++i) out[n++] = x[i];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) out[n++] = x[i] * x[j];
}

inline std::vector<double> poly2_features(std::span<const double> x) {
  std::vector<double> out(poly2_feature_count(x.size()));
  poly2_features_into(x, out);
  return out;
}

struct PolyRidgeModel {
  Scaler scaler;
  std::vector<double> weights;
  double lambda = 1e-3;
  std::string warning;

  std::size_t dim() const { return scaler.dim(); }

  double predict(std::span<const double> x) const {
    const std::size_t d = dim();
    if (x.size() != d)
      throw DomainError("predict: input has " + std::to_string(x.size()) + " columns, model expects " +
                        std::to_string(d));
    std::array<double, max_input_dim> z{};
    for (std::size_t i = 0; i < d; ++i) z[i] = (x[i] - scaler.means[i]) / scaler.stds[i];
    double y = weights[0];
    std::size_t n = 1;
    for (std::size_t i = 0; i < d; ++i) y += weights[n++] * z[i];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) y += weights[n++] * z[i] * z[j];
    return y;
  }
};

inline std::vector<double> predict_batch(const PolyRidgeModel& model, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != model.dim())
    throw DomainError("predict_batch: input has " + std::to_string(X.cols()) + " columns, model expects " +
                      std::to_string(model.dim()));
  std::vector<double> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    out[static_cast<std::size_t>(r)] =
        model.predict(std::span<const double>(X.row(r).data(), static_cast<std::size_t>(X.cols())));
  return out;
}

/// Minimizes sum (y - w.phi(scale(x)))^2 + lambda * |w without bias|^2 via the
/// normal equations. At lambda = 0 a numerically singular system is retried
/// with lambda = 1e-10 and the model carries a warning.
inline PolyRidgeModel ridge_fit(const Matrix& X, std::span<const double> y, double lambda) {
  if (X.rows() < 1) throw DomainError("ridge_fit: need at least one row");
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw DomainError("ridge_fit: X and y row counts differ");
  if (!(lambda >= 0.0)) throw DomainError("ridge_fit: lambda must be >= 0");
  const std::size_t d = static_cast<std::size_t>(X.cols());
  if (d > max_input_dim) throw DomainError("ridge_fit: input dimension too large");

  PolyRidgeModel model;
  model.scaler = fit_scaler(X);
  model.lambda = lambda;
  const std::size_t p = poly2_feature_count(d);

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  std::array<double, max_input_dim> z{};
  Eigen::VectorXd phi(static_cast<Eigen::Index>(p));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (std::size_t i = 0; i < d; ++i)
      z[i] = (X(r, static_cast<Eigen::Index>(i)) - model.scaler.means[i]) / model.scaler.stds[i];
    poly2_features_into(std::span<const double>(z.data(), d), std::span<double>(phi.data(), p));
    A.selfadjointView<Eigen::Lower>().rankUpdate(phi);
    b += y[static_cast<std::size_t>(r)] * phi;
  }
  A.triangularView<Eigen::StrictlyUpper>() = A.transpose();

  auto solve = [&](double lam) {
    Eigen::MatrixXd R = A;
    for (Eigen::Index i = 1; i < R.rows(); ++i) R(i, i) += lam;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(R);
    // rcond() alone misses exact zero pivots, so look at the pivots too.
    const auto D = ldlt.vectorD();
    const bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-15 &&
                    D.minCoeff() > 1e-15 * D.cwiseAbs().maxCoeff();
    return std::pair{ok, Eigen::VectorXd(ldlt.solve(b))};
  };

  auto [ok, w] = solve(lambda);
  if (!ok || !w.allFinite()) {
    if (lambda == 0.0) {
      model.warning = "ridge_fit: singular normal matrix at lambda=0, refit with lambda=1e-10";
      model.lambda = 1e-10;
      std::tie(ok, w) = solve(1e-10);
    }
    if (!w.allFinite()) throw DomainError("ridge_fit: normal equations could not be solved");
  }
  model.weights.assign(w.data(), w.data() + w.size());
  return model;
}

/// Sum of squared training residuals.
inline double training_loss(const PolyRidgeModel& model, const Matrix& X, std::span<const double> y) {
  const auto pred = predict_batch(model, X);
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) loss += (pred[i] - y[i]) * (pred[i] - y[i]);
  return loss;
}

// ---------------------------------------------------------------------------
// Text format:
//   polyridge 1
//   dim <d>
//   lambda <l>
//   means <d values>
//   stds <d values>
//   weights <p> <p values>
// Values use 17 significant digits, so a round trip is exact.
// ---------------------------------------------------------------------------

inline void write_model(std::ostream& os, const PolyRidgeModel& model) {
  os << std::setprecision(17);
  os << "polyridge 1\n";
  os << "dim " << model.dim() << "\n";
  os << "lambda " << model.lambda << "\n";
  os << "means";
  for (double v : model.scaler.means) os << ' ' << v;
  os << "\nstds";
  for (double v : model.scaler.stds) os << ' ' << v;
  os << "\nweights " << model.weights.size();
  for (double v : model.weights) os << ' ' << v;
  os << "\n";
}

inline PolyRidgeModel read_model(std::istream& is) {
  auto expect = [&](const std::string& word) {
    std::string tok;
    if (!(is >> tok) || tok != word) throw IoError("read_model: expected '" + word + "'");
  };
  auto number = [&]() {
    std::string tok;
    if (!(is >> tok)) throw IoError("read_model: truncated input");
    try {
      return std::stod(tok);
    } catch (const std::exception&) {
      throw IoError("read_model: bad number '" + tok + "'");
    }
  };
  expect("polyridge");
  if (number() != 1.0) throw IoError("read_model: unsupported version");
  expect("dim");
  const auto d = static_cast<std::size_t>(number());
  PolyRidgeModel model;
  expect("lambda");
  model.lambda = number();
  expect("means");
  for (std::size_t i = 0; i < d; ++i) model.scaler.means.push_back(number());
  expect("stds");
  for (std::size_t i = 0; i < d; ++i) model.scaler.stds.push_back(number());
  expect("weights");
  const auto p = static_cast<std::size_t>(number());
  if (p != poly2_feature_count(d)) throw IoError("read_model: weight count does not match dim");
  for (std::size_t i = 0; i < p; ++i) model.weights.push_back(number());
  return model;
}

inline std::string to_text(const PolyRidgeModel& model) {
  std::ostringstream os;
  write_model(os, model);
  return os.str();
}

inline PolyRidgeModel from_text(const std::string& text) {
  std::istringstream is(text);
  return read_model(is);
}

}  // namespace qbatch

namespace qbatch {

/// Piecewise regressor over a discrete stage column: one PolyRidgeModel per
/// distinct stage value, each fitted on the remaining columns. Without a stage
/// column it is a single global PolyRidgeModel.
///
/// Queries at a stage value with no fitted model use the nearest fitted stage.
struct StagedPolyModel {
  std::optional<std::size_t> stage_column;
  std::vector<double> stage_keys;
  std::vector<PolyRidgeModel> models;

  std::size_t dim() const { return models.front().dim() + (stage_column ? 1 : 0); }

  std::size_t model_index(double stage) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < stage_keys.size(); ++i)
      if (std::abs(stage_keys[i] - stage) < std::abs(stage_keys[best] - stage)) best = i;
    return best;
  }

  double predict(std::span<const double> x) const {
    if (!stage_column) return models.front().predict(x);
    const std::size_t col = *stage_column;
    if (x.size() != dim())
      throw DomainError("predict: input has " + std::to_string(x.size()) + " columns, model expects " +
                        std::to_string(dim()));
    std::array<double, max_input_dim> rest{};
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (i != col) rest[n++] = x[i];
    return models[model_index(x[col])].predict(std::span<const double>(rest.data(), n));
  }
};

inline StagedPolyModel staged_ridge_fit(const Matrix& X, std::span<const double> y, double lambda,
                                        std::optional<std::size_t> stage_column) {
  StagedPolyModel out;
  out.stage_column = stage_column;
  if (!stage_column) {
    out.stage_keys = {0.0};
    out.models.push_back(ridge_fit(X, y, lambda));
    return out;
  }
  const auto col = static_cast<Eigen::Index>(*stage_column);
  if (col >= X.cols()) throw DomainError("staged_ridge_fit: stage column out of range");
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw DomainError("ridge_fit: X and y row counts differ");

  std::vector<double> keys;
  for (Eigen::Index r = 0; r < X.rows(); ++r) keys.push_back(X(r, col));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  for (double key : keys) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = 0; r < X.rows(); ++r)
      if (X(r, col) == key) rows.push_back(r);
    Matrix Xs(static_cast<Eigen::Index>(rows.size()), X.cols() - 1);
    std::vector<double> ys;
    ys.reserve(rows.size());
    for (std::size_t q = 0; q < rows.size(); ++q) {
      Eigen::Index c2 = 0;
      for (Eigen::Index c = 0; c < X.cols(); ++c)
        if (c != col) Xs(static_cast<Eigen::Index>(q), c2++) = X(rows[q], c);
      ys.push_back(y[static_cast<std::size_t>(rows[q])]);
    }
    out.stage_keys.push_back(key);
    out.models.push_back(ridge_fit(Xs, ys, lambda));
  }
  return out;
}

// staged 1
// stage_column <c | none>
// models <n>
// key <k> followed by one polyridge block, n times
inline void write_model(std::ostream& os, const StagedPolyModel& model) {
  os << std::setprecision(17);
  os << "staged 1\n";
  os << "stage_column ";
  if (model.stage_column)
    os << *model.stage_column;
  else
    os << "none";
  os << "\nmodels " << model.models.size() << "\n";
  for (std::size_t i = 0; i < model.models.size(); ++i) {
    os << "key " << model.stage_keys[i] << "\n";
    write_model(os, model.models[i]);
  }
}

inline StagedPolyModel read_staged_model(std::istream& is) {
  std::string tok;
  auto expect = [&](const std::string& word) {
    if (!(is >> tok) || tok != word) throw IoError("read_staged_model: expected '" + word + "'");
  };
  expect("staged");
  if (!(is >> tok) || tok != "1") throw IoError("read_staged_model: unsupported version");
  expect("stage_column");
  if (!(is >> tok)) throw IoError("read_staged_model: truncated input");
  StagedPolyModel model;
  if (tok != "none") model.stage_column = static_cast<std::size_t>(std::stoul(tok));
  expect("models");
  std::size_t n = 0;
  if (!(is >> n) || n == 0) throw IoError("read_staged_model: bad model count");
  for (std::size_t i = 0; i < n; ++i) {
    expect("key");
    if (!(is >> tok)) throw IoError("read_staged_model: truncated input");
    model.stage_keys.push_back(std::stod(tok));
    model.models.push_back(read_model(is));
  }
  return model;
}

inline std::string to_text(const StagedPolyModel& model) {
  std::ostringstream os;
  write_model(os, model);
  return os.str();
}

inline StagedPolyModel staged_from_text(const std::string& text) {
  std::istringstream is(text);
  return read_staged_model(is);
}

}  // namespace qbatch
