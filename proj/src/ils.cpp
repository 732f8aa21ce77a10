#include "md/ils.h"

namespace md {

double huberScale(double chi, double threshold) {
  if (chi <= threshold) {
    return 1.0;
  }
  return threshold / chi;
}

Eigen::VectorXd solveStep(const QuadraticForm& q, double damping) {
  const Eigen::Index n = q.b.size();
  Eigen::MatrixXd a = q.H;
  a.diagonal().array() += damping;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    const int nullity = static_cast<int>(n - lu.rank());
    throw RankDeficient("solveStep: singular system, nullspace dimension " +
                            std::to_string(nullity),
                        nullity);
  }
  return lu.solve(-q.b);
}

QuadraticForm linearize(const std::vector<const Factor*>& factors,
                        const Eigen::VectorXd& x) {
  NormalEquations<> acc(static_cast<int>(x.size()));
  Eigen::VectorXd e;
  Eigen::MatrixXd jac, info;
  for (const Factor* f : factors) {
    if (f->evaluate(x, e, jac, info)) {
      acc.add(e, info, jac);
    } else {
      acc.countInvalid();
    }
  }
  if (acc.numFactors() == 0) {
    throw InsufficientData("linearize: zero valid factors");
  }
  return acc.form();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> solveIteration(const QuadraticForm& q,
                                                           const Eigen::VectorXd& x,
                                                           double damping) {
  const Eigen::VectorXd dx = solveStep(q, damping);
  return {x + dx, dx};
}

}  // namespace md
