#pragma once

#include "varseg/core.hpp"

#include <vector>

namespace varseg::solvers {

/// Coefficient groups as linear indices into the pq x p coefficient matrix
/// B = Phi' (column-major, index = predictor + equation * pq). Predictor
/// (lag l, series j) is row (l-1)p + j of B; equation i is column i.
std::vector<std::vector<int>> coefficient_groups(const Grouping& grouping, int p, int q);

/// Latent-copy representation of a (possibly overlapping) group structure.
/// Every group owns its own copy of its coefficients; the coefficient vector
/// is the sum of the copies. Coefficients not covered by any group get a
/// singleton group. For a partition this is just a permutation.
class GroupStructure {
public:
    GroupStructure() = default;
    GroupStructure(std::vector<std::vector<int>> groups, int coef_count);

    int coef_count() const { return coef_count_; }
    int latent_size() const { return static_cast<int>(latent_to_coef_.size()); }
    bool overlapping() const { return overlapping_; }
    const std::vector<int>& group_offsets() const { return offsets_; }

    Vector to_coef(const Eigen::Ref<const Vector>& latent) const;
    Vector to_latent_gradient(const Eigen::Ref<const Vector>& coef_gradient) const;
    /// A latent vector mapping back to coef (each coefficient placed in its
    /// first covering group).
    Vector from_coef(const Eigen::Ref<const Vector>& coef) const;

    /// Groupwise l2 shrinkage of a latent vector.
    Vector prox(const Eigen::Ref<const Vector>& latent, double thr) const;
    double penalty(const Eigen::Ref<const Vector>& latent) const;

private:
    int coef_count_ = 0;
    bool overlapping_ = false;
    std::vector<int> latent_to_coef_;
    std::vector<int> offsets_;  // group g spans [offsets_[g], offsets_[g+1])
    std::vector<int> first_latent_;
};

}  // namespace varseg::solvers
