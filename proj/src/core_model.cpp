#include "fedal/core_model.hpp"

#include <algorithm>

namespace fedal {

double ConstraintBlock::reported_metric(const Vec& v) const {
  if (v.size() == 0) return 0.0;
  if (cone() == Cone::ZeroCone) return inf_norm(v);
  return std::max(0.0, v.maxCoeff());
}

BoxIndicator::BoxIndicator(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  require_dimension(upper_.size(), lower_.size(), "BoxIndicator bounds");
  if ((lower_.array() > upper_.array()).any()) throw std::invalid_argument("BoxIndicator: lower > upper");
}

double BoxIndicator::value(const Vec& w) const {
  require_dimension(w.size(), lower_.size(), "BoxIndicator::value");
  const bool inside = (w.array() >= lower_.array()).all() && (w.array() <= upper_.array()).all();
  return inside ? 0.0 : kInf;
}

Vec BoxIndicator::prox(const Vec& u, double) const {
  require_dimension(u.size(), lower_.size(), "BoxIndicator::prox");
  return u.cwiseMax(lower_).cwiseMin(upper_);
}

L1Term::L1Term(double weight) : weight_(weight) {
  if (!(weight >= 0.0)) throw std::invalid_argument("L1Term: negative weight");
}

Vec L1Term::prox(const Vec& u, double alpha) const {
  const double t = alpha * weight_;
  return u.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

QuadraticFunction::QuadraticFunction(Mat A, Vec b, double c) : A_(std::move(A)), b_(std::move(b)), c_(c) {
  require_dimension(A_.rows(), b_.size(), "QuadraticFunction rows");
  require_dimension(A_.cols(), b_.size(), "QuadraticFunction cols");
}

double QuadraticFunction::value_and_gradient(const Vec& w, Vec& grad) const {
  require_dimension(w.size(), b_.size(), "QuadraticFunction");
  const Vec Aw = A_ * w;
  grad = Aw + b_;
  return 0.5 * w.dot(Aw) + b_.dot(w) + c_;
}

double QuadraticFunction::value(const Vec& w) const {
  require_dimension(w.size(), b_.size(), "QuadraticFunction");
  return 0.5 * w.dot(A_ * w) + b_.dot(w) + c_;
}

LinearConstraints::LinearConstraints(Mat C, Vec d, Cone cone) : C_(std::move(C)), d_(std::move(d)), cone_(cone) {
  require_dimension(d_.size(), C_.rows(), "LinearConstraints offset");
}

Vec LinearConstraints::values(const Vec& w) const {
  require_dimension(w.size(), C_.cols(), "LinearConstraints");
  return C_ * w + d_;
}

Vec CallableConstraints::values(const Vec& w) const {
  Vec v;
  Mat j;
  fn_(w, v, j);
  return v;
}

Mat CallableConstraints::jacobian_t(const Vec& w) const {
  Vec v;
  Mat j;
  fn_(w, v, j);
  return j;
}

ProblemSpec::ProblemSpec(Index dimension, std::vector<ClientTerms> clients,
                         std::shared_ptr<const ConstraintBlock> server_constraints,
                         std::shared_ptr<const SimpleTerm> simple_term)
    : dimension_(dimension),
      clients_(std::move(clients)),
      server_(server_constraints ? std::move(server_constraints)
                                 : std::make_shared<EmptyConstraints>(dimension)),
      h_(simple_term ? std::move(simple_term) : std::make_shared<ZeroTerm>()) {
  if (dimension_ < 1) throw DimensionError("ProblemSpec: dimension must be >= 1");
  if (clients_.empty()) throw std::invalid_argument("ProblemSpec: at least one client is required");
  require_dimension(server_->dimension(), dimension_, "server constraint block");
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    auto& c = clients_[i];
    if (!c.objective) throw std::invalid_argument("ProblemSpec: client objective missing");
    if (!c.constraints) c.constraints = std::make_shared<EmptyConstraints>(dimension_);
    require_dimension(c.objective->dimension(), dimension_, "client objective");
    require_dimension(c.constraints->dimension(), dimension_, "client constraint block");
    if (!(c.weight > 0.0)) throw std::invalid_argument("ProblemSpec: client weight must be positive");
  }
}

const ConstraintBlock& ProblemSpec::block(std::size_t i) const {
  return i == 0 ? *server_ : *clients_.at(i - 1).constraints;
}

Index ProblemSpec::total_constraints() const {
  Index m = server_->size();
  for (const auto& c : clients_) m += c.constraints->size();
  return m;
}

bool ProblemSpec::convex() const {
  for (std::size_t i = 0; i < num_blocks(); ++i)
    if (!block(i).convex()) return false;
  return true;
}

MultiplierState MultiplierState::zeros(const ProblemSpec& p) {
  MultiplierState s;
  s.blocks.reserve(p.num_blocks());
  for (std::size_t i = 0; i < p.num_blocks(); ++i) s.blocks.push_back(Vec::Zero(p.block(i).size()));
  return s;
}

bool MultiplierState::cone_feasible(const ProblemSpec& p) const {
  if (blocks.size() != p.num_blocks()) return false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].size() != p.block(i).size()) return false;
    if (!blocks[i].allFinite()) return false;
    if (p.block(i).cone() == Cone::NonnegativeOrthant && blocks[i].size() > 0 && blocks[i].minCoeff() < 0.0)
      return false;
  }
  return true;
}

Vec MultiplierState::stacked() const {
  Index m = 0;
  for (const auto& b : blocks) m += b.size();
  Vec out(m);
  Index off = 0;
  for (const auto& b : blocks) {
    out.segment(off, b.size()) = b;
    off += b.size();
  }
  return out;
}

double eval_smooth_objective(const ProblemSpec& p, const Vec& w) {
  require_dimension(w.size(), p.dimension(), "eval_smooth_objective");
  double total = 0.0;
  for (const auto& c : p.clients()) total += c.objective->value(w);
  return total;
}

double eval_aggregate_objective(const ProblemSpec& p, const Vec& w) {
  const double h = p.simple_term().value(w);
  if (h == kInf) return kInf;
  return eval_smooth_objective(p, w) + h;
}

}  // namespace fedal
