#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "hiersel/model_space.hpp"

namespace hiersel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative tolerance on triangular-factor diagonals below which a column is
/// treated as linearly dependent.
inline constexpr double kRankTolerance = 1e-10;

/// Affine recoding applied to the main effects before polynomial expansion.
struct MainTransform {
  VectorXd shift;  // subtracted
  VectorXd scale;  // divided by
  bool center = false;
  bool standardize = false;

  MatrixXd apply(const MatrixXd& x) const {
    if (shift.size() == 0) return x;
    MatrixXd out = x;
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = (out.col(j).array() - shift(j)) / scale(j);
    return out;
  }
};

/// Response vector and raw main-effect matrix (n x p).
struct Dataset {
  VectorXd y;
  MatrixXd x;
  std::vector<std::string> names;  // main-effect column names
  std::string response;
  MainTransform transform;          // already applied to x

  Eigen::Index n() const { return y.size(); }
  std::size_t p() const { return static_cast<std::size_t>(x.cols()); }

  void check() const {
    if (y.size() == 0) throw std::invalid_argument("Dataset: no observations");
    if (x.rows() != y.size()) throw std::invalid_argument("Dataset: x and y row counts differ");
    if (!y.allFinite() || !x.allFinite()) throw std::invalid_argument("Dataset: non-finite values");
  }

  /// Copy with mains optionally centered and scaled to unit sample variance.
  Dataset standardized(bool center, bool scale) const {
    Dataset d = *this;
    const auto p = x.cols();
    d.transform.center = center;
    d.transform.standardize = scale;
    d.transform.shift = VectorXd::Zero(p);
    d.transform.scale = VectorXd::Ones(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double mean = x.col(j).mean();
      if (center) d.transform.shift(j) = mean;
      if (scale && x.rows() > 1) {
        const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / static_cast<double>(x.rows() - 1));
        if (sd > 0) d.transform.scale(j) = sd;
      }
    }
    d.x = d.transform.apply(x);
    return d;
  }
};

/// Column of prod_j x_j^alpha_j.
inline VectorXd term_column(const MatrixXd& x, const Term& t) {
  VectorXd col = VectorXd::Ones(x.rows());
  for (std::size_t j = 0; j < t.dimension(); ++j)
    for (unsigned e = 0; e < t[j]; ++e) col.array() *= x.col(static_cast<Eigen::Index>(j)).array();
  return col;
}

inline MatrixXd expand_terms(const MatrixXd& x, const std::vector<Term>& terms) {
  MatrixXd out(x.rows(), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t c = 0; c < terms.size(); ++c) {
    if (terms[c].dimension() != static_cast<std::size_t>(x.cols()))
      throw std::invalid_argument("expand_terms: term dimension does not match data");
    out.col(static_cast<Eigen::Index>(c)) = term_column(x, terms[c]);
  }
  return out;
}

/// Design matrix for M_B together with the included nodes, canonical column order.
inline MatrixXd build_design(const Dataset& data, const ModelSpace& space, const Model& m) {
  return expand_terms(data.x, space.terms_of(m));
}

/// Raised when a model has at least as many effective columns as observations.
class SaturatedModel : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Number of leading diagonal entries of a pivoted triangular factor above tolerance.
inline Eigen::Index numerical_rank(const Eigen::ColPivHouseholderQR<MatrixXd>& qr, double reference_scale) {
  const auto& r = qr.matrixQR();
  const Eigen::Index d = std::min(r.rows(), r.cols());
  if (d == 0) return 0;
  const double tol = kRankTolerance * std::max(std::abs(r(0, 0)), reference_scale);
  Eigen::Index k = 0;
  while (k < d && std::abs(r(k, k)) > tol) ++k;
  return k;
}

/// g-prior Bayes factor of a model against the base, from its fit summary:
/// log BF = ((n - kB - k)/2) log(1+g) - ((n - kB)/2) log(1 + g (1 - R^2)).
inline double log_bf_gprior(double n, double k_base, double k, double g, double r2) {
  return 0.5 * (n - k_base - k) * std::log1p(g) - 0.5 * (n - k_base) * std::log1p(g * (1.0 - r2));
}

/// Log marginal likelihood up to a model-independent constant.
///
/// Implementations are pure functions of the model and must be safe to call
/// concurrently. This is the plug-in point for alternative parameter priors.
class MarginalLikelihood {
 public:
  virtual ~MarginalLikelihood() = default;
  virtual double log_marginal(const Model& m) const = 0;
  /// Posterior-mean coefficients aligned with `space.terms_of(m)`.
  virtual VectorXd posterior_mean(const Model& m) const = 0;
  virtual const ModelSpace& space() const = 0;
};

/// Unit-information g-prior (default g = n) on the non-base coefficients,
/// flat on the base coefficients and on sigma^2, normalized so that the base
/// model has log marginal 0.
///
/// At construction y and the node columns are residualized on the base
/// design and the residualized node matrix Z is reduced once by pivoted QR,
/// Z = Q T. Any model's columns then satisfy Z_S = Q T_S, so each model fit
/// is a small pivoted QR of T_S instead of an n-row decomposition.
class GPriorMarginal final : public MarginalLikelihood {
 public:
  GPriorMarginal(const Dataset& data, const ModelSpace& space, std::optional<double> g = std::nullopt)
      : space_(&space) {
    data.check();
    if (data.p() != space.num_vars()) throw std::invalid_argument("GPriorMarginal: data has wrong number of mains");
    n_ = static_cast<double>(data.n());
    g_ = g.value_or(n_);
    if (!(g_ > 0)) throw std::invalid_argument("GPriorMarginal: g must be positive");

    xb_ = expand_terms(data.x, space.base_terms());
    xn_ = expand_terms(data.x, space.nodes());
    y_ = data.y;
    col_scale_.resize(xn_.cols());
    for (Eigen::Index c = 0; c < xn_.cols(); ++c) col_scale_(c) = xn_.col(c).norm();

    VectorXd yr = y_;
    MatrixXd z = xn_;
    if (xb_.cols() > 0) {
      base_qr_.compute(xb_);
      double ref = 0;
      for (Eigen::Index c = 0; c < xb_.cols(); ++c) ref = std::max(ref, xb_.col(c).norm());
      k_base_ = numerical_rank(base_qr_, ref);
      if (k_base_ > 0) {
        const MatrixXd qb = base_qr_.householderQ() * MatrixXd::Identity(xb_.rows(), k_base_);
        yr -= qb * (qb.transpose() * yr);
        z -= qb * (qb.transpose() * z);
      }
    }
    tss_ = yr.squaredNorm();
    if (z.cols() > 0) {
      Eigen::ColPivHouseholderQR<MatrixXd> zq(z);
      const Eigen::Index r = numerical_rank(zq, col_scale_.maxCoeff());
      const MatrixXd rfull = zq.matrixQR().topRows(r).triangularView<Eigen::Upper>();
      t_ = rfull * zq.colsPermutation().transpose();
      VectorXd qty = yr;
      qty.applyOnTheLeft(zq.householderQ().transpose());
      c_ = qty.head(r);
    }
    if (n_ <= static_cast<double>(k_base_)) throw SaturatedModel("base model saturates the data");
  }

  double g() const noexcept { return g_; }
  double n() const noexcept { return n_; }
  Eigen::Index base_rank() const noexcept { return k_base_; }
  const ModelSpace& space() const override { return *space_; }

  struct Fit {
    Eigen::Index rank = 0;
    double r2 = 0;
  };

  Fit fit(const Model& m) const {
    const auto idx = m.nodes();
    Fit f;
    if (idx.empty()) return f;
    if (t_.rows() == 0) return f;
    MatrixXd a(t_.rows(), static_cast<Eigen::Index>(idx.size()));
    double ref = 0;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      a.col(static_cast<Eigen::Index>(c)) = t_.col(static_cast<Eigen::Index>(idx[c]));
      ref = std::max(ref, col_scale_(static_cast<Eigen::Index>(idx[c])));
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
    f.rank = numerical_rank(qr, ref);
    if (f.rank == 0 || tss_ <= 0) return f;
    VectorXd qc = c_;
    qc.applyOnTheLeft(qr.householderQ().transpose());
    const double explained = qc.head(f.rank).squaredNorm();
    f.r2 = std::clamp(explained / tss_, 0.0, 1.0);
    return f;
  }

  double log_marginal(const Model& m) const override {
    if (m.capacity() != space_->size()) throw std::invalid_argument("log_marginal: model/space mismatch");
    const Fit f = fit(m);
    if (n_ <= static_cast<double>(k_base_ + f.rank))
      throw SaturatedModel("model with " + std::to_string(k_base_ + f.rank) + " effective columns saturates n=" +
                           std::to_string(static_cast<long long>(n_)) + " observations");
    if (f.rank == 0) return 0.0;
    return log_bf_gprior(n_, static_cast<double>(k_base_), static_cast<double>(f.rank), g_, f.r2);
  }

  /// Node coefficients are g/(1+g) times least squares on the residualized
  /// columns; base coefficients are least squares on the remaining signal.
  VectorXd posterior_mean(const Model& m) const override {
    const auto idx = m.nodes();
    VectorXd beta_nodes = VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    if (!idx.empty() && t_.rows() > 0) {
      MatrixXd a(t_.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t c = 0; c < idx.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = t_.col(static_cast<Eigen::Index>(idx[c]));
      Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
      double ref = 0;
      for (auto i : idx) ref = std::max(ref, col_scale_(static_cast<Eigen::Index>(i)));
      qr.setThreshold(kRankTolerance * std::max(1.0, ref / std::max(std::abs(qr.matrixQR()(0, 0)), 1e-300)));
      beta_nodes = qr.solve(c_) * (g_ / (1.0 + g_));
    }
    VectorXd remaining = y_;
    for (std::size_t c = 0; c < idx.size(); ++c)
      remaining -= xn_.col(static_cast<Eigen::Index>(idx[c])) * beta_nodes(static_cast<Eigen::Index>(c));
    VectorXd beta_base = VectorXd::Zero(xb_.cols());
    if (xb_.cols() > 0) beta_base = base_qr_.solve(remaining);

    // Merge into canonical order of terms_of(m).
    const auto terms = space_->terms_of(m);
    VectorXd out(static_cast<Eigen::Index>(terms.size()));
    const auto& base = space_->base_terms();
    for (std::size_t t = 0; t < terms.size(); ++t) {
      if (auto bi = std::find(base.begin(), base.end(), terms[t]); bi != base.end()) {
        out(static_cast<Eigen::Index>(t)) = beta_base(static_cast<Eigen::Index>(bi - base.begin()));
      } else {
        const auto node = *space_->index_of(terms[t]);
        const auto pos = std::find(idx.begin(), idx.end(), node) - idx.begin();
        out(static_cast<Eigen::Index>(t)) = beta_nodes(static_cast<Eigen::Index>(pos));
      }
    }
    return out;
  }

 private:
  const ModelSpace* space_;
  double n_ = 0;
  double g_ = 0;
  MatrixXd xb_, xn_;
  VectorXd y_;
  VectorXd col_scale_;
  Eigen::ColPivHouseholderQR<MatrixXd> base_qr_;
  Eigen::Index k_base_ = 0;
  double tss_ = 0;
  MatrixXd t_;
  VectorXd c_;
};

/// Model-keyed store of log marginals, safe for concurrent use.
class MarginalCache {
 public:
  std::optional<double> find(const Model& m) const {
    std::shared_lock lock(mu_);
    if (auto it = values_.find(m); it != values_.end()) return it->second;
    return std::nullopt;
  }

  /// Re-inserting a key must carry the same value (within 1e-9).
  void insert(const Model& m, double value) {
    std::unique_lock lock(mu_);
    auto [it, fresh] = values_.emplace(m, value);
    if (!fresh && std::abs(it->second - value) > 1e-9)
      throw std::logic_error("MarginalCache: conflicting values for the same model");
  }

  double get_or_compute(const Model& m, const MarginalLikelihood& eval) {
    if (auto v = find(m)) {
      hits_.fetch_add(1, std::memory_order_relaxed);
      return *v;
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    const double v = eval.log_marginal(m);
    insert(m, v);
    return v;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return values_.size();
  }
  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<Model, double, ModelHash> values_;
  std::atomic<std::size_t> hits_{0}, misses_{0};
};

/// beta' X_T' (I - H_M) X_T beta / (n sigma^2): the share of the true mean
/// left unexplained by the candidate model's column space (base included).
/// `beta` is aligned with `space.terms_of(truth)`.
inline double directed_distance(const Dataset& data, const ModelSpace& space, const Model& truth, const VectorXd& beta,
                                const Model& candidate, double sigma2 = 1.0) {
  const MatrixXd xt = build_design(data, space, truth);
  if (xt.cols() != beta.size()) throw std::invalid_argument("directed_distance: beta length mismatch");
  const VectorXd mean = xt * beta;
  const MatrixXd xm = build_design(data, space, candidate);
  VectorXd resid = mean;
  if (xm.cols() > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(xm);
    double ref = 0;
    for (Eigen::Index c = 0; c < xm.cols(); ++c) ref = std::max(ref, xm.col(c).norm());
    const auto r = numerical_rank(qr, ref);
    if (r > 0) {
      const MatrixXd q = qr.householderQ() * MatrixXd::Identity(xm.rows(), r);
      resid -= q * (q.transpose() * mean);
    }
  }
  return resid.squaredNorm() / (static_cast<double>(data.n()) * sigma2);
}

}  // namespace hiersel
