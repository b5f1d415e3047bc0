#include "fedal/problem_library.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fedal {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  const auto where = [&] { return " at data row " + std::to_string(row) + ", column '" + column + "'"; };
  if (cell.empty() || cell == "NA" || cell == "?") throw std::runtime_error("missing value" + where());
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw std::runtime_error("non-numeric value '" + cell + "'" + where());
  }
  return v;
}

int parse_binary(const std::string& cell, std::size_t row, const std::string& column) {
  const double v = parse_cell(cell, row, column);
  if (v != 0.0 && v != 1.0) {
    throw std::runtime_error("column '" + column + "' must be 0 or 1 at data row " + std::to_string(row));
  }
  return static_cast<int>(v);
}

Vec labels_as_vec(const LabeledDataset& ds) {
  Vec y(static_cast<Index>(ds.size()));
  for (std::size_t j = 0; j < ds.size(); ++j) y[static_cast<Index>(j)] = ds.labels[j];
  return y;
}

Mat random_orthogonal(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat G(d, d);
  for (Index c = 0; c < d; ++c)
    for (Index r = 0; r < d; ++r) G(r, c) = normal(rng);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index c = 0; c < d; ++c) {
    if (R(c, c) < 0.0) Q.col(c) = -Q.col(c);
  }
  return Q;
}

}  // namespace

std::size_t LabeledDataset::count_label(int y) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), y));
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  if (has_groups()) out.groups.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t r = rows[k];
    if (r >= size()) throw std::out_of_range("LabeledDataset::subset: row index out of range");
    out.features.row(static_cast<Index>(k)) = features.row(static_cast<Index>(r));
    out.labels.push_back(labels[r]);
    if (has_groups()) out.groups.push_back(groups[r]);
  }
  return out;
}

LabeledDataset LabeledDataset::select(int value, bool by_group) const {
  if (by_group && !has_groups()) throw std::invalid_argument("LabeledDataset::select: dataset has no groups");
  const auto& key = by_group ? groups : labels;
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < size(); ++j)
    if (key[j] == value) rows.push_back(j);
  return subset(rows);
}

void LabeledDataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw DimensionError("LabeledDataset: feature rows and labels differ in count");
  if (has_groups() && groups.size() != labels.size())
    throw DimensionError("LabeledDataset: groups and labels differ in count");
  if (!features.allFinite()) throw std::invalid_argument("LabeledDataset: non-finite feature");
}

LabeledDataset read_labeled_csv(const std::string& path, const std::string& label_column,
                                const std::optional<std::string>& group_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset '" + path + "' is empty");
  const auto header = split_csv_line(line);

  std::optional<std::size_t> label_idx, group_idx;
  std::vector<std::size_t> feature_idx;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_idx = c;
    else if (group_column && header[c] == *group_column) group_idx = c;
    else feature_idx.push_back(c);
  }
  if (!label_idx) throw std::runtime_error("dataset '" + path + "' has no column '" + label_column + "'");
  if (group_column && !group_idx)
    throw std::runtime_error("dataset '" + path + "' has no column '" + *group_column + "'");

  std::vector<double> values;
  LabeledDataset ds;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("dataset '" + path + "' row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    }
    for (const std::size_t c : feature_idx) values.push_back(parse_cell(cells[c], row, header[c]));
    ds.labels.push_back(parse_binary(cells[*label_idx], row, label_column));
    if (group_idx) ds.groups.push_back(parse_binary(cells[*group_idx], row, *group_column));
  }
  const auto cols = static_cast<Index>(feature_idx.size());
  ds.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Index>(row), cols);
  ds.validate();
  return ds;
}

LogisticLoss::LogisticLoss(Mat features, Vec labels, double scale)
    : X_(std::move(features)), y_(std::move(labels)), scale_(scale) {
  require_dimension(y_.size(), X_.rows(), "LogisticLoss labels");
  if (X_.rows() == 0) throw std::invalid_argument("LogisticLoss: empty sample set");
}

LogisticLoss::LogisticLoss(const LabeledDataset& ds, double scale) : LogisticLoss(ds.features, labels_as_vec(ds), scale) {}

double LogisticLoss::value_and_gradient(const Vec& w, Vec& grad) const {
  require_dimension(w.size(), X_.cols(), "LogisticLoss::value_and_gradient");
  const Vec z = X_ * w;
  const double factor = scale_ / static_cast<double>(X_.rows());
  double sum = 0.0;
  Vec r(z.size());
  for (Index j = 0; j < z.size(); ++j) {
    sum += logistic_loss(z[j], static_cast<int>(y_[j]));
    r[j] = sigmoid(z[j]) - y_[j];
  }
  grad.noalias() = factor * (X_.transpose() * r);
  return factor * sum;
}

double LogisticLoss::value(const Vec& w) const {
  require_dimension(w.size(), X_.cols(), "LogisticLoss::value");
  const Vec z = X_ * w;
  double sum = 0.0;
  for (Index j = 0; j < z.size(); ++j) sum += logistic_loss(z[j], static_cast<int>(y_[j]));
  return scale_ * sum / static_cast<double>(X_.rows());
}

LossLevelConstraint::LossLevelConstraint(const LabeledDataset& positives, double threshold)
    : loss_(positives), threshold_(threshold) {}

Vec LossLevelConstraint::values(const Vec& w) const {
  Vec v(1);
  v[0] = loss_.value(w) - threshold_;
  return v;
}

Mat LossLevelConstraint::jacobian_t(const Vec& w) const { return loss_.gradient(w); }

void LossLevelConstraint::evaluate(const Vec& w, Vec& v, Mat& j) const {
  Vec g;
  v.resize(1);
  v[0] = loss_.value_and_gradient(w, g) - threshold_;
  j = g;
}

DisparityConstraint::DisparityConstraint(const LabeledDataset& ds, double threshold)
    : loss0_(ds.select(0, true)), loss1_(ds.select(1, true)), threshold_(threshold) {}

Vec DisparityConstraint::values(const Vec& w) const {
  const double gap = loss0_.value(w) - loss1_.value(w);
  Vec v(2);
  v << gap - threshold_, -gap - threshold_;
  return v;
}

Mat DisparityConstraint::jacobian_t(const Vec& w) const {
  Vec v;
  Mat j;
  evaluate(w, v, j);
  return j;
}

void DisparityConstraint::evaluate(const Vec& w, Vec& v, Mat& j) const {
  Vec g0, g1;
  const double gap = loss0_.value_and_gradient(w, g0) - loss1_.value_and_gradient(w, g1);
  v.resize(2);
  v << gap - threshold_, -gap - threshold_;
  j.resize(w.size(), 2);
  j.col(0) = g0 - g1;
  j.col(1) = g1 - g0;
}

ProblemSpec build_np_problem(const std::vector<LabeledDataset>& clients, double threshold) {
  if (clients.empty()) throw std::invalid_argument("build_np_problem: no clients");
  const Index d = clients.front().dimension();
  const double share = 1.0 / static_cast<double>(clients.size());
  std::vector<ClientTerms> terms;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& ds = clients[i];
    if (ds.count_label(0) == 0 || ds.count_label(1) == 0) {
      throw std::invalid_argument("build_np_problem: client " + std::to_string(i + 1) + " lacks one of the classes");
    }
    terms.push_back({std::make_shared<LogisticLoss>(ds.select(0, false), share),
                     std::make_shared<LossLevelConstraint>(ds.select(1, false), threshold),
                     static_cast<double>(ds.size())});
  }
  return ProblemSpec(d, std::move(terms));
}

ProblemSpec build_fairness_problem(const std::vector<LabeledDataset>& clients, const LabeledDataset& server,
                                   double threshold) {
  if (clients.empty()) throw std::invalid_argument("build_fairness_problem: no clients");
  const Index d = clients.front().dimension();
  const double share = 1.0 / static_cast<double>(clients.size());
  const auto check_groups = [](const LabeledDataset& ds, const std::string& who) {
    if (!ds.has_groups() || std::count(ds.groups.begin(), ds.groups.end(), 0) == 0 ||
        std::count(ds.groups.begin(), ds.groups.end(), 1) == 0) {
      throw std::invalid_argument("build_fairness_problem: " + who + " needs samples from both subgroups");
    }
  };
  std::vector<ClientTerms> terms;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    check_groups(clients[i], "client " + std::to_string(i + 1));
    terms.push_back({std::make_shared<LogisticLoss>(clients[i], share),
                     std::make_shared<DisparityConstraint>(clients[i], threshold),
                     static_cast<double>(clients[i].size())});
  }
  check_groups(server, "server");
  return ProblemSpec(d, std::move(terms), std::make_shared<DisparityConstraint>(server, threshold));
}

std::vector<LabeledDataset> partition_stratified(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("partition_stratified: n must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> folds(n);
  for (const int y : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t j = 0; j < ds.size(); ++j)
      if (ds.labels[j] == y) rows.push_back(j);
    if (rows.size() < n) {
      throw std::invalid_argument("partition_stratified: class " + std::to_string(y) + " has " +
                                  std::to_string(rows.size()) + " samples, fewer than " + std::to_string(n) +
                                  " folds");
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t k = 0; k < rows.size(); ++k) folds[k % n].push_back(rows[k]);
  }
  std::vector<LabeledDataset> out;
  out.reserve(n);
  for (auto& f : folds) {
    std::sort(f.begin(), f.end());
    out.push_back(ds.subset(f));
  }
  return out;
}

Vec sample_unit_sphere(Index d, std::mt19937_64& rng) {
  if (d <= 0) throw std::invalid_argument("sample_unit_sphere: dimension must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(d);
  double norm = 0.0;
  while (norm == 0.0) {
    for (Index k = 0; k < d; ++k) v[k] = normal(rng);
    norm = v.norm();
  }
  return v / norm;
}

double LcqpInstance::objective(const Vec& w) const {
  double total = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) total += 0.5 * w.dot(A[i] * w) + b[i].dot(w);
  return total;
}

LcqpInstance generate_lcqp(Index d, std::size_t n, Index m, std::uint64_t seed) {
  if (d <= 0 || n == 0 || m <= 0) throw std::invalid_argument("generate_lcqp: d, n and m must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> spectrum(0.5, 1.0);
  std::normal_distribution<double> entry(0.0, 1.0 / std::sqrt(static_cast<double>(d)));

  LcqpInstance inst;
  inst.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const Mat U = random_orthogonal(d, rng);
    Vec D(d);
    for (Index k = 0; k < d; ++k) D[k] = spectrum(rng);
    Mat A = U * D.asDiagonal() * U.transpose();
    inst.A.push_back(0.5 * (A + A.transpose()));
    inst.b.push_back(sample_unit_sphere(d, rng));
  }
  for (std::size_t i = 0; i <= n; ++i) {
    Mat C(m, d);
    for (Index c = 0; c < d; ++c)
      for (Index r = 0; r < m; ++r) C(r, c) = entry(rng);
    inst.C.push_back(std::move(C));
    inst.offsets.push_back(sample_unit_sphere(m, rng));
  }
  return inst;
}

ProblemSpec lcqp_problem(const LcqpInstance& inst) {
  if (inst.C.size() != inst.num_clients() + 1 || inst.offsets.size() != inst.C.size() ||
      inst.b.size() != inst.A.size()) {
    throw std::invalid_argument("lcqp_problem: inconsistent block counts");
  }
  std::vector<ClientTerms> terms;
  for (std::size_t i = 0; i < inst.num_clients(); ++i) {
    terms.push_back({std::make_shared<QuadraticFunction>(inst.A[i], inst.b[i]),
                     std::make_shared<LinearConstraints>(inst.C[i + 1], inst.offsets[i + 1], Cone::ZeroCone)});
  }
  return ProblemSpec(inst.dimension(), std::move(terms),
                     std::make_shared<LinearConstraints>(inst.C[0], inst.offsets[0], Cone::ZeroCone));
}

LcqpSolution lcqp_oracle(const LcqpInstance& inst) {
  const Index d = inst.dimension();
  if (d == 0 || inst.C.size() != inst.num_clients() + 1)
    throw std::invalid_argument("lcqp_oracle: malformed instance");
  Index m = 0;
  for (const auto& C : inst.C) m += C.rows();

  Mat H = Mat::Zero(d, d);
  Vec g = Vec::Zero(d);
  for (std::size_t i = 0; i < inst.num_clients(); ++i) {
    H += inst.A[i];
    g += inst.b[i];
  }
  Mat C(m, d);
  Vec off(m);
  Index row = 0;
  for (std::size_t i = 0; i < inst.C.size(); ++i) {
    C.middleRows(row, inst.C[i].rows()) = inst.C[i];
    off.segment(row, inst.C[i].rows()) = inst.offsets[i];
    row += inst.C[i].rows();
  }

  Eigen::ColPivHouseholderQR<Mat> ct_qr(C.transpose());
  const Index rank = ct_qr.rank();
  if (rank < m) {
    throw std::runtime_error("lcqp_oracle: constraint matrix is rank deficient (rank " + std::to_string(rank) +
                             " < " + std::to_string(m) + " rows)");
  }
  if (m < d) {
    const Mat Q = ct_qr.householderQ();
    const Mat Z = Q.rightCols(d - m);
    Eigen::SelfAdjointEigenSolver<Mat> eig(Z.transpose() * H * Z, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    if (!(lo > 0.0)) {
      throw std::runtime_error("lcqp_oracle: objective Hessian is not positive definite on the null space of the "
                               "constraints (min eigenvalue " + std::to_string(lo) + ")");
    }
  }

  Mat K = Mat::Zero(d + m, d + m);
  K.topLeftCorner(d, d) = H;
  K.topRightCorner(d, m) = C.transpose();
  K.bottomLeftCorner(m, d) = C;
  Vec rhs(d + m);
  rhs << -g, -off;
  const Vec sol = K.partialPivLu().solve(rhs);
  const double residual = inf_norm(K * sol - rhs);
  if (!sol.allFinite() || residual > 1e-9) {
    throw std::runtime_error("lcqp_oracle: KKT solve residual " + std::to_string(residual) + " exceeds 1e-9");
  }

  LcqpSolution out;
  out.w = sol.head(d);
  row = d;
  for (const auto& Ci : inst.C) {
    out.mu.push_back(sol.segment(row, Ci.rows()));
    row += Ci.rows();
  }
  out.objective = inst.objective(out.w);
  return out;
}

}  // namespace fedal
