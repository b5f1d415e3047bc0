#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fedal/core_model.hpp"

namespace fedal {

/// Rows of (x, y) with y in {0, 1} and an optional subgroup tag in {0, 1}.
struct LabeledDataset {
  Mat features;  // one sample per row
  std::vector<int> labels;
  std::vector<int> groups;  // empty when absent

  Index dimension() const { return features.cols(); }
  std::size_t size() const { return labels.size(); }
  bool has_groups() const { return !groups.empty(); }
  std::size_t count_label(int y) const;

  LabeledDataset subset(const std::vector<std::size_t>& rows) const;
  /// Rows whose label (by_group = false) or subgroup (true) equals `value`.
  LabeledDataset select(int value, bool by_group) const;
  void validate() const;
};

/// CSV with a header row. Every column except `label_column` and the optional
/// `group_column` is a feature. Empty, "NA" or "?" cells are rejected.
LabeledDataset read_labeled_csv(const std::string& path, const std::string& label_column = "label",
                                const std::optional<std::string>& group_column = std::nullopt);

/// phi(w; (x, y)) = -y w'x + log(1 + e^{w'x}).
template <typename Scalar>
Scalar logistic_loss(Scalar margin, int label) {
  return softplus(margin) - static_cast<Scalar>(label) * margin;
}

/// scale * mean_j phi(w; (x_j, y_j)).
class LogisticLoss final : public SmoothFunction {
 public:
  LogisticLoss(Mat features, Vec labels, double scale = 1.0);
  explicit LogisticLoss(const LabeledDataset& ds, double scale = 1.0);

  Index dimension() const override { return X_.cols(); }
  double value_and_gradient(const Vec& w, Vec& grad) const override;
  double value(const Vec& w) const override;

 private:
  Mat X_;
  Vec y_;
  double scale_;
};

/// Neyman-Pearson class-1 constraint: mean loss on class-1 rows - r <= 0.
/// Reported metric: the class-1 loss itself.
class LossLevelConstraint final : public ConstraintBlock {
 public:
  LossLevelConstraint(const LabeledDataset& positives, double threshold);

  Index dimension() const override { return loss_.dimension(); }
  Index size() const override { return 1; }
  Cone cone() const override { return Cone::NonnegativeOrthant; }
  Vec values(const Vec& w) const override;
  Mat jacobian_t(const Vec& w) const override;
  void evaluate(const Vec& w, Vec& v, Mat& j) const override;
  double reported_metric(const Vec& v) const override { return v[0] + threshold_; }

 private:
  LogisticLoss loss_;
  double threshold_;
};

/// Two-sided loss-disparity bound -r <= L_0(w) - L_1(w) <= r as two rows
///   (L_0 - L_1 - r, L_1 - L_0 - r) <= 0,
/// L_g the mean loss over subgroup g. Nonconvex. Reported metric: |L_0 - L_1|.
class DisparityConstraint final : public ConstraintBlock {
 public:
  DisparityConstraint(const LabeledDataset& ds, double threshold);

  Index dimension() const override { return loss0_.dimension(); }
  Index size() const override { return 2; }
  Cone cone() const override { return Cone::NonnegativeOrthant; }
  Vec values(const Vec& w) const override;
  Mat jacobian_t(const Vec& w) const override;
  void evaluate(const Vec& w, Vec& v, Mat& j) const override;
  double reported_metric(const Vec& v) const override { return std::max(v[0], v[1]) + threshold_; }
  bool convex() const override { return false; }

 private:
  LogisticLoss loss0_;
  LogisticLoss loss1_;
  double threshold_;
};

/// Neyman-Pearson classification: client i minimizes (1/n) mean class-0 loss
/// subject to mean class-1 loss <= r. No server constraint, h = 0.
ProblemSpec build_np_problem(const std::vector<LabeledDataset>& clients, double threshold);

/// Fairness-aware classification: client objective (1/n) mean loss; every party
/// (server = block 0) bounds its subgroup loss disparity by r.
ProblemSpec build_fairness_problem(const std::vector<LabeledDataset>& clients, const LabeledDataset& server,
                                   double threshold);

/// n folds with (floor or ceil of) count/n samples of each class, shuffled by seed.
std::vector<LabeledDataset> partition_stratified(const LabeledDataset& ds, std::size_t n, std::uint64_t seed);

/// Sample uniformly from the unit sphere in R^d (normalized Gaussian).
Vec sample_unit_sphere(Index d, std::mt19937_64& rng);

/// min sum_i 0.5 w'A_i w + b_i'w s.t. C_i w + d_i = 0, i = 0..n.
struct LcqpInstance {
  std::vector<Mat> A;        // i = 1..n (stored 0-based)
  std::vector<Vec> b;        // i = 1..n
  std::vector<Mat> C;        // i = 0..n
  std::vector<Vec> offsets;  // d_i, i = 0..n
  std::uint64_t seed = 0;

  std::size_t num_clients() const { return A.size(); }
  Index dimension() const { return A.empty() ? 0 : A.front().cols(); }
  double objective(const Vec& w) const;
};

/// A_i = U_i D_i U_i' (D_i ~ U[0.5, 1], U_i orthogonal), C_i ~ N(0, 1/d),
/// b_i and d_i uniform on the unit sphere.
LcqpInstance generate_lcqp(Index d, std::size_t n, Index m, std::uint64_t seed);

ProblemSpec lcqp_problem(const LcqpInstance& inst);

struct LcqpSolution {
  Vec w;
  std::vector<Vec> mu;  // blocks 0..n
  double objective = 0.0;
};

/// Dense KKT solve of [sum A_i, C'; C, 0][w; mu] = [-sum b_i; -d]. Throws
/// std::runtime_error naming the defect when C lacks full row rank, sum A_i is
/// not positive definite on null(C), or the solve residual exceeds 1e-9.
LcqpSolution lcqp_oracle(const LcqpInstance& inst);

}  // namespace fedal
