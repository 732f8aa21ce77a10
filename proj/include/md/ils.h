// Iterative least squares building blocks shared by registration and
// pose-graph optimization: compensated accumulation of the normal
// equations, the damped solve step and the Huber kernel.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace md {

struct InsufficientData : std::runtime_error {
  explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

struct RankDeficient : std::runtime_error {
  RankDeficient(const std::string& what, int nullspace_dim)
      : std::runtime_error(what), nullspace_dimension(nullspace_dim) {}
  int nullspace_dimension;
};

// Compensated scalar sum (Neumaier's variant of Kahan, which stays exact
// even when a term dwarfs the running sum). Non-finite terms are rejected
// and counted.
inline void kahanAdd(double& sum, double& compensation, double term) {
  const double t = sum + term;
  compensation +=
      std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
  sum = t;
}

struct KahanAccumulator {
  double sum          = 0.0;
  double compensation = 0.0;
  std::int64_t dropped = 0;

  void add(double term) {
    if (!std::isfinite(term)) {
      ++dropped;
      return;
    }
    kahanAdd(sum, compensation, term);
  }

  double value() const { return sum + compensation; }
};

struct QuadraticForm {
  Eigen::MatrixXd H;
  Eigen::VectorXd b;
  double chi2              = 0.0;
  std::size_t num_factors  = 0;  // factors that contributed
  std::size_t num_invalid  = 0;  // factors skipped as invalid
};

// Accumulates H = sum J'WJ, b = sum J'We, chi2 = sum e'We entrywise with
// Kahan compensation. Dim is the state dimension (Eigen::Dynamic allowed).
template <int Dim = Eigen::Dynamic>
class NormalEquations {
 public:
  using Mat = Eigen::Matrix<double, Dim, Dim>;
  using Vec = Eigen::Matrix<double, Dim, 1>;

  explicit NormalEquations(int dim = Dim) {
    h_sum_.setZero(dim, dim);
    h_comp_.setZero(dim, dim);
    b_sum_.setZero(dim);
    b_comp_.setZero(dim);
  }

  int dimension() const { return static_cast<int>(b_sum_.size()); }

  // Full-state jacobian (residual_dim x state_dim).
  template <typename DE, typename DW, typename DJ>
  void add(const Eigen::MatrixBase<DE>& e, const Eigen::MatrixBase<DW>& info,
           const Eigen::MatrixBase<DJ>& jac) {
    if (!e.allFinite() || !jac.allFinite()) {
      ++num_invalid_;
      return;
    }
    const auto wj = (info * jac).eval();
    addEntrywise(h_sum_, h_comp_, (jac.transpose() * wj).eval());
    addEntrywise(b_sum_, b_comp_, (jac.transpose() * (info * e)).eval());
    chi2_.add(e.dot(info * e));
    ++num_factors_;
  }

  // Block-sparse jacobian: pairs of (first state index, jacobian block).
  void addBlocks(const Eigen::VectorXd& e, const Eigen::MatrixXd& info,
                 const std::vector<std::pair<int, Eigen::MatrixXd>>& blocks) {
    if (!e.allFinite()) {
      ++num_invalid_;
      return;
    }
    for (const auto& [ia, ja] : blocks) {
      const Eigen::MatrixXd wja = info * ja;
      for (const auto& [ib, jb] : blocks) {
        addEntrywiseAt(ib, ia, (jb.transpose() * wja).eval());
      }
      addEntrywiseVecAt(ia, (ja.transpose() * (info * e)).eval());
    }
    chi2_.add(e.dot(info * e));
    ++num_factors_;
  }

  void countInvalid() { ++num_invalid_; }

  QuadraticForm form() const {
    QuadraticForm q;
    q.H           = h_sum_ + h_comp_;
    q.b           = b_sum_ + b_comp_;
    q.chi2        = chi2_.value();
    q.num_factors = num_factors_;
    q.num_invalid = num_invalid_;
    return q;
  }

  std::size_t numFactors() const { return num_factors_; }
  std::size_t numInvalid() const { return num_invalid_; }
  double chi2() const { return chi2_.value(); }

 private:
  template <typename A, typename B>
  static void addEntrywise(A& sum, A& comp, const B& term) {
    for (Eigen::Index c = 0; c < term.cols(); ++c) {
      for (Eigen::Index r = 0; r < term.rows(); ++r) {
        kahanAdd(sum(r, c), comp(r, c), term(r, c));
      }
    }
  }
  void addEntrywiseAt(int row0, int col0, const Eigen::MatrixXd& term) {
    for (Eigen::Index c = 0; c < term.cols(); ++c) {
      for (Eigen::Index r = 0; r < term.rows(); ++r) {
        kahanAdd(h_sum_(row0 + r, col0 + c), h_comp_(row0 + r, col0 + c), term(r, c));
      }
    }
  }
  void addEntrywiseVecAt(int row0, const Eigen::VectorXd& term) {
    for (Eigen::Index r = 0; r < term.rows(); ++r) {
      kahanAdd(b_sum_(row0 + r), b_comp_(row0 + r), term(r));
    }
  }

  Mat h_sum_, h_comp_;
  Vec b_sum_, b_comp_;
  KahanAccumulator chi2_;
  std::size_t num_factors_ = 0;
  std::size_t num_invalid_ = 0;
};

// Huber scaling of the information matrix: untouched below the threshold,
// scaled by threshold/chi above it. Returns the applied scale.
double huberScale(double chi, double threshold);

// Solves (H + damping I) dx = -b. Throws RankDeficient on singular systems.
Eigen::VectorXd solveStep(const QuadraticForm& q, double damping = 0.0);

struct SolverConfig {
  int max_iterations       = 10;    // per pyramid level
  double termination_dx    = 1e-6;  // stop below this |dx|
  double termination_dchi2 = 1e-4;  // stop when the relative chi2 change plateaus
  double damping           = 0.0;   // constant Levenberg term
  double max_damping       = 1e6;   // retry ceiling when chi2 grows
};

// Generic factor over a Euclidean state vector, used by the solver-level
// tests and available for small ad-hoc problems.
class Factor {
 public:
  virtual ~Factor() = default;
  // Returns false when the residual is invalid at x.
  virtual bool evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& e,
                        Eigen::MatrixXd& jac, Eigen::MatrixXd& info) const = 0;
};

QuadraticForm linearize(const std::vector<const Factor*>& factors,
                        const Eigen::VectorXd& x);

// One Gauss-Newton step on a Euclidean state. Returns (new_x, dx).
std::pair<Eigen::VectorXd, Eigen::VectorXd> solveIteration(const QuadraticForm& q,
                                                           const Eigen::VectorXd& x,
                                                           double damping = 0.0);

}  // namespace md
