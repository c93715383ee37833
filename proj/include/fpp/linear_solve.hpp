#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "graph_model.hpp"

namespace fpp {

/// Sparse LU factorization of I - P restricted to a node subset S.
///
/// Solves (I - P_SS) u = r for the committor/mfpt family and
/// (I - P_SS)^T u = r for the visit-count family, sharing one factorization.
/// Vectors passed in and out are indexed by global node id; entries outside
/// S are ignored on input and zero on output.
class RestrictedSystem {
  public:
    RestrictedSystem(const SparseRowMatrix &p, const NodeSet &subset) : subset_(subset) {
        const std::size_t n = static_cast<std::size_t>(p.rows());
        local_.assign(n, -1);
        for (NodeId x : subset_) local_[x] = static_cast<int>(global_.size()), global_.push_back(x);
        const auto m = static_cast<Eigen::Index>(global_.size());
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(p.nonZeros()) + global_.size());
        for (Eigen::Index i = 0; i < m; ++i) trips.emplace_back(i, i, 1.0);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (SparseRowMatrix::InnerIterator it(p, global_[i]); it; ++it) {
                int j = local_[it.col()];
                if (j >= 0) trips.emplace_back(i, j, -it.value());
            }
        }
        matrix_.resize(m, m);
        matrix_.setFromTriplets(trips.begin(), trips.end());
        matrix_.makeCompressed();
        if (m == 0) return;
        lu_.analyzePattern(matrix_);
        lu_.factorize(matrix_);
        if (lu_.info() != Eigen::Success)
            throw NumericalError("sparse LU factorization failed on a system of size " + std::to_string(m) + ": " +
                                 lu_.lastErrorMessage());
    }

    std::size_t size() const { return global_.size(); }
    const NodeSet &subset() const { return subset_; }

    std::vector<double> solve(const std::vector<double> &rhs) const { return run(rhs, false); }
    std::vector<double> solve_transposed(const std::vector<double> &rhs) const { return run(rhs, true); }

  private:
    std::vector<double> run(const std::vector<double> &rhs, bool transposed) const {
        std::vector<double> out(local_.size(), 0.0);
        const auto m = static_cast<Eigen::Index>(global_.size());
        if (m == 0) return out;
        Eigen::VectorXd b(m);
        for (Eigen::Index i = 0; i < m; ++i) b[i] = rhs[global_[i]];
        Eigen::VectorXd u;
        if (transposed) {
            u = lu_.transpose().solve(b);
        } else {
            u = lu_.solve(b);
        }
        Eigen::VectorXd r = transposed ? Eigen::VectorXd(matrix_.transpose() * u - b) : Eigen::VectorXd(matrix_ * u - b);
        const double scale = std::max({1.0, b.lpNorm<Eigen::Infinity>(), u.lpNorm<Eigen::Infinity>()});
        const double res = r.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(res) || res > tol::residual * scale)
            throw NumericalError("linear solve residual " + std::to_string(res) + " exceeds tolerance");
        for (Eigen::Index i = 0; i < m; ++i) out[global_[i]] = u[i];
        return out;
    }

    NodeSet subset_;
    std::vector<int> local_;
    std::vector<NodeId> global_;
    Eigen::SparseMatrix<double> matrix_;
    mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

} // namespace fpp
