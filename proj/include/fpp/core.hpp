#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpp {

using NodeId = int;

/// Numerical thresholds shared across modules.
namespace tol {
/// Membership tests q(x) < 1 and sum_z p(z|x) q(z) > 0.
inline constexpr double membership = 1e-9;
/// Row sums of stochastic matrices.
inline constexpr double row_sum = 1e-10;
/// Initial distributions must sum to one this tightly.
inline constexpr double distribution = 1e-12;
/// Residual accepted from a direct sparse solve.
inline constexpr double residual = 1e-10;
/// Conservation laws checked after flux assembly.
inline constexpr double conservation = 1e-8;
/// Guard for segment-chain denominators.
inline constexpr double denominator = 1e-14;
} // namespace tol

/// Input violates a structural requirement (bad graph, sets, data shape).
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A solve, quadrature or consistency check failed numerically.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Subset of {0, ..., n-1} with O(1) membership and ordered iteration.
class NodeSet {
  public:
    NodeSet() = default;

    explicit NodeSet(std::size_t universe) : mask_(universe, 0) {}

    NodeSet(std::size_t universe, std::initializer_list<NodeId> ids)
        : NodeSet(universe, std::vector<NodeId>(ids)) {}

    NodeSet(std::size_t universe, const std::vector<NodeId> &ids) : mask_(universe, 0) {
        for (NodeId x : ids) insert(x);
    }

    static NodeSet from_mask(const std::vector<char> &mask) {
        NodeSet s(mask.size());
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) s.insert(static_cast<NodeId>(i));
        return s;
    }

    void insert(NodeId x) {
        if (x < 0 || static_cast<std::size_t>(x) >= mask_.size())
            throw ValidationError("node index " + std::to_string(x) + " out of range");
        if (mask_[x]) return;
        mask_[x] = 1;
        members_.insert(std::lower_bound(members_.begin(), members_.end(), x), x);
    }

    bool contains(NodeId x) const {
        return x >= 0 && static_cast<std::size_t>(x) < mask_.size() && mask_[x] != 0;
    }

    std::size_t universe() const { return mask_.size(); }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }

    const std::vector<NodeId> &members() const { return members_; }
    auto begin() const { return members_.begin(); }
    auto end() const { return members_.end(); }

    NodeSet complement() const {
        NodeSet c(mask_.size());
        for (std::size_t i = 0; i < mask_.size(); ++i)
            if (!mask_[i]) c.insert(static_cast<NodeId>(i));
        return c;
    }

    NodeSet united(const NodeSet &o) const {
        NodeSet u = *this;
        for (NodeId x : o) u.insert(x);
        return u;
    }

    NodeSet minus(const NodeSet &o) const {
        NodeSet d(mask_.size());
        for (NodeId x : members_)
            if (!o.contains(x)) d.insert(x);
        return d;
    }

    bool intersects(const NodeSet &o) const {
        return std::any_of(members_.begin(), members_.end(), [&](NodeId x) { return o.contains(x); });
    }

    bool is_subset_of(const NodeSet &o) const {
        return std::all_of(members_.begin(), members_.end(), [&](NodeId x) { return o.contains(x); });
    }

    friend bool operator==(const NodeSet &a, const NodeSet &b) { return a.mask_ == b.mask_; }

  private:
    std::vector<char> mask_;
    std::vector<NodeId> members_;
};

inline std::string join_ids(const std::vector<NodeId> &ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(ids[i]);
    }
    return out;
}

} // namespace fpp
