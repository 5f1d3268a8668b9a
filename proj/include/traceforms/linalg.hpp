#pragma once

#include <traceforms/error.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <string>

namespace traceforms {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense LU with partial pivoting plus one step of iterative refinement.
///
/// Identity checks downstream target residuals around 1e-10, so every solve
/// goes through a refinement pass against the unfactored matrix.
class RefinedSolver {
public:
    RefinedSolver() = default;

    explicit RefinedSolver(Matrix a, double singular_rcond = 1e-14) : a_(std::move(a)) {
        if (a_.rows() != a_.cols()) {
            throw InvalidInput("RefinedSolver: matrix must be square");
        }
        if (a_.rows() == 0) {
            return;
        }
        lu_.compute(a_);
        rcond_ = lu_.rcond();
        if (!(rcond_ > singular_rcond)) {
            throw SingularKilledGenerator("matrix is numerically singular (rcond = " +
                                          std::to_string(rcond_) + ")");
        }
    }

    template <typename Rhs>
    [[nodiscard]] Matrix solve(const Eigen::MatrixBase<Rhs>& b) const {
        if (a_.rows() == 0) {
            return Matrix(0, b.cols());
        }
        Matrix x = lu_.solve(b);
        Matrix r = b - a_ * x;
        x += lu_.solve(r);
        return x;
    }

    [[nodiscard]] double rcond() const { return rcond_; }
    [[nodiscard]] const Matrix& matrix() const { return a_; }

private:
    Matrix a_;
    Eigen::PartialPivLU<Matrix> lu_;
    double rcond_ = 1.0;
};

template <typename Derived>
[[nodiscard]] double max_abs(const Eigen::MatrixBase<Derived>& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Entrywise difference scaled by the larger of the two magnitudes.
template <typename A, typename B>
[[nodiscard]] double relative_difference(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    const double scale = std::max({max_abs(a), max_abs(b), 1e-300});
    return max_abs(a - b) / scale;
}

[[nodiscard]] inline double relative_difference(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

/// Returns (exp(tQ), integral_0^t exp(sQ) ds) via the augmented-matrix trick.
struct ExpIntegral {
    Matrix exp;
    Matrix integral;
};

[[nodiscard]] inline ExpIntegral exp_and_integral(const Matrix& q, double t) {
    const Eigen::Index n = q.rows();
    Matrix aug = Matrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = q * t;
    aug.topRightCorner(n, n) = Matrix::Identity(n, n) * t;
    const Matrix e = aug.exp();
    return {e.topLeftCorner(n, n), e.topRightCorner(n, n)};
}

} // namespace traceforms
