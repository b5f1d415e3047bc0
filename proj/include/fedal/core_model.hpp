#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "fedal/types.hpp"

namespace fedal {

/// Differentiable scalar function on R^d.
class SmoothFunction {
 public:
  virtual ~SmoothFunction() = default;

  virtual Index dimension() const = 0;

  /// Writes the gradient into `grad` (resized as needed) and returns the value.
  virtual double value_and_gradient(const Vec& w, Vec& grad) const = 0;

  virtual double value(const Vec& w) const {
    Vec g;
    return value_and_gradient(w, g);
  }

  Vec gradient(const Vec& w) const {
    Vec g;
    value_and_gradient(w, g);
    return g;
  }
};

/// Vector-valued constraint map c : R^d -> R^m with a cone tag. The transposed
/// Jacobian is d x m, column j being the gradient of c_j.
class ConstraintBlock {
 public:
  virtual ~ConstraintBlock() = default;

  virtual Index dimension() const = 0;
  virtual Index size() const = 0;
  virtual Cone cone() const = 0;

  virtual Vec values(const Vec& w) const = 0;
  virtual Mat jacobian_t(const Vec& w) const = 0;

  virtual void evaluate(const Vec& w, Vec& values_out, Mat& jacobian_t_out) const {
    values_out = values(w);
    jacobian_t_out = jacobian_t(w);
  }

  /// Quantity reported as the block's feasibility in experiment tables. By
  /// default the violation: max [c_j]_+ for orthant blocks, max |c_j| otherwise.
  virtual double reported_metric(const Vec& block_values) const;

  virtual bool convex() const { return true; }
};

/// Closed convex term h with an exact proximal map.
class SimpleTerm {
 public:
  virtual ~SimpleTerm() = default;

  /// h(w); +inf outside dom(h).
  virtual double value(const Vec& w) const = 0;

  /// argmin_x { ||x - u||^2 / 2 + alpha h(x) }.
  virtual Vec prox(const Vec& u, double alpha) const = 0;

  virtual bool is_zero() const { return false; }
};

class ZeroTerm final : public SimpleTerm {
 public:
  double value(const Vec&) const override { return 0.0; }
  Vec prox(const Vec& u, double) const override { return u; }
  bool is_zero() const override { return true; }
};

/// Indicator of the box lower <= w <= upper (entries may be infinite).
class BoxIndicator final : public SimpleTerm {
 public:
  BoxIndicator(Vec lower, Vec upper);
  double value(const Vec& w) const override;
  Vec prox(const Vec& u, double alpha) const override;

 private:
  Vec lower_;
  Vec upper_;
};

/// h(w) = weight * ||w||_1.
class L1Term final : public SimpleTerm {
 public:
  explicit L1Term(double weight);
  double value(const Vec& w) const override { return weight_ * w.lpNorm<1>(); }
  Vec prox(const Vec& u, double alpha) const override;

 private:
  double weight_;
};

/// 0.5 w'Aw + b'w + c with A symmetric.
class QuadraticFunction final : public SmoothFunction {
 public:
  QuadraticFunction(Mat A, Vec b, double c = 0.0);

  Index dimension() const override { return b_.size(); }
  double value_and_gradient(const Vec& w, Vec& grad) const override;
  double value(const Vec& w) const override;

  const Mat& hessian() const { return A_; }
  const Vec& linear() const { return b_; }

 private:
  Mat A_;
  Vec b_;
  double c_;
};

/// SmoothFunction backed by a callable; handy for composites and tests.
class CallableFunction final : public SmoothFunction {
 public:
  using Fn = std::function<double(const Vec&, Vec&)>;
  CallableFunction(Index dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

  Index dimension() const override { return dim_; }
  double value_and_gradient(const Vec& w, Vec& grad) const override { return fn_(w, grad); }

 private:
  Index dim_;
  Fn fn_;
};

/// Affine block C w + d.
class LinearConstraints final : public ConstraintBlock {
 public:
  LinearConstraints(Mat C, Vec d, Cone cone);

  Index dimension() const override { return C_.cols(); }
  Index size() const override { return C_.rows(); }
  Cone cone() const override { return cone_; }
  Vec values(const Vec& w) const override;
  Mat jacobian_t(const Vec&) const override { return C_.transpose(); }

  const Mat& matrix() const { return C_; }
  const Vec& offset() const { return d_; }

 private:
  Mat C_;
  Vec d_;
  Cone cone_;
};

/// m = 0 block.
class EmptyConstraints final : public ConstraintBlock {
 public:
  explicit EmptyConstraints(Index dim) : dim_(dim) {}

  Index dimension() const override { return dim_; }
  Index size() const override { return 0; }
  Cone cone() const override { return Cone::NonnegativeOrthant; }
  Vec values(const Vec&) const override { return Vec(0); }
  Mat jacobian_t(const Vec&) const override { return Mat(dim_, 0); }

 private:
  Index dim_;
};

/// Constraint block defined by callables, for tests and ad-hoc problems.
class CallableConstraints final : public ConstraintBlock {
 public:
  using Fn = std::function<void(const Vec&, Vec&, Mat&)>;
  CallableConstraints(Index dim, Index size, Cone cone, Fn fn, bool convex = true)
      : dim_(dim), size_(size), cone_(cone), fn_(std::move(fn)), convex_(convex) {}

  Index dimension() const override { return dim_; }
  Index size() const override { return size_; }
  Cone cone() const override { return cone_; }
  Vec values(const Vec& w) const override;
  Mat jacobian_t(const Vec& w) const override;
  void evaluate(const Vec& w, Vec& v, Mat& j) const override { fn_(w, v, j); }
  bool convex() const override { return convex_; }

 private:
  Index dim_;
  Index size_;
  Cone cone_;
  Fn fn_;
  bool convex_;
};

/// One client's private terms. `weight` is the local sample count (used by the
/// rho_i = a * m_i rule); it defaults to 1.
struct ClientTerms {
  std::shared_ptr<const SmoothFunction> objective;
  std::shared_ptr<const ConstraintBlock> constraints;
  double weight = 1.0;
};

/// min sum_i f_i(w) + h(w) s.t. c_i(w) in cone_i, i = 0..n (block 0 on the server).
/// Immutable after construction.
class ProblemSpec {
 public:
  ProblemSpec(Index dimension, std::vector<ClientTerms> clients,
              std::shared_ptr<const ConstraintBlock> server_constraints = nullptr,
              std::shared_ptr<const SimpleTerm> simple_term = nullptr);

  Index dimension() const { return dimension_; }
  std::size_t num_clients() const { return clients_.size(); }
  const ClientTerms& client(std::size_t i) const { return clients_.at(i); }
  const std::vector<ClientTerms>& clients() const { return clients_; }

  /// Block i for i = 0..n; block 0 is the server constraint.
  const ConstraintBlock& block(std::size_t i) const;
  std::size_t num_blocks() const { return clients_.size() + 1; }
  const ConstraintBlock& server_constraints() const { return *server_; }
  const SimpleTerm& simple_term() const { return *h_; }

  Index total_constraints() const;

  /// False when any block reports itself nonconvex.
  bool convex() const;

 private:
  Index dimension_;
  std::vector<ClientTerms> clients_;
  std::shared_ptr<const ConstraintBlock> server_;
  std::shared_ptr<const SimpleTerm> h_;
};

/// mu_i for i = 0..n.
struct MultiplierState {
  std::vector<Vec> blocks;

  static MultiplierState zeros(const ProblemSpec& p);
  bool cone_feasible(const ProblemSpec& p) const;
  Vec stacked() const;
};

/// sum_i f_i(w) + h(w).
double eval_aggregate_objective(const ProblemSpec& p, const Vec& w);

/// sum_i f_i(w) without h.
double eval_smooth_objective(const ProblemSpec& p, const Vec& w);

}  // namespace fedal
