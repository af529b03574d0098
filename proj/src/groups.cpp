#include "varseg/groups.hpp"

#include <string>

namespace varseg::solvers {

std::vector<std::vector<int>> coefficient_groups(const Grouping& grouping, int p, int q)
{
    const int pq = p * q;
    auto idx = [pq](int predictor, int equation) { return predictor + equation * pq; };
    std::vector<std::vector<int>> out;

    switch (grouping.kind) {
    case GroupKind::columnwise_separate:
        for (int k = 0; k < pq; ++k) {
            std::vector<int> g;
            for (int e = 0; e < p; ++e) g.push_back(idx(k, e));
            out.push_back(std::move(g));
        }
        break;
    case GroupKind::columnwise_simultaneous:
        for (int j = 0; j < p; ++j) {
            std::vector<int> g;
            for (int l = 0; l < q; ++l)
                for (int e = 0; e < p; ++e) g.push_back(idx(l * p + j, e));
            out.push_back(std::move(g));
        }
        break;
    case GroupKind::rowwise_separate:
        for (int l = 0; l < q; ++l)
            for (int i = 0; i < p; ++i) {
                std::vector<int> g;
                for (int j = 0; j < p; ++j) g.push_back(idx(l * p + j, i));
                out.push_back(std::move(g));
            }
        break;
    case GroupKind::rowwise_simultaneous:
        for (int i = 0; i < p; ++i) {
            std::vector<int> g;
            for (int k = 0; k < pq; ++k) g.push_back(idx(k, i));
            out.push_back(std::move(g));
        }
        break;
    case GroupKind::hierarchical_lag:
        // Nested suffix groups {Phi^(l:q)(i, .)} for every row i and start lag l.
        for (int i = 0; i < p; ++i)
            for (int l0 = 0; l0 < q; ++l0) {
                std::vector<int> g;
                for (int l = l0; l < q; ++l)
                    for (int j = 0; j < p; ++j) g.push_back(idx(l * p + j, i));
                out.push_back(std::move(g));
            }
        break;
    case GroupKind::explicit_index:
        for (const auto& flat : grouping.groups) {
            std::vector<int> g;
            for (int f : flat) {
                if (f < 0 || f >= pq) {
                    throw ConfigError("group index " + std::to_string(f) + " outside [0, " +
                                      std::to_string(pq) + ")");
                }
                const int lag = f / p;
                const int pos = f % p;
                if (grouping.orientation == GroupOrientation::column) {
                    for (int e = 0; e < p; ++e) g.push_back(idx(f, e));
                } else {
                    for (int j = 0; j < p; ++j) g.push_back(idx(lag * p + j, pos));
                }
            }
            if (!g.empty()) out.push_back(std::move(g));
        }
        break;
    }
    return out;
}

GroupStructure::GroupStructure(std::vector<std::vector<int>> groups, int coef_count)
    : coef_count_(coef_count), first_latent_(coef_count, -1)
{
    std::vector<int> cover(coef_count, 0);
    offsets_.push_back(0);
    auto add_group = [&](const std::vector<int>& g) {
        for (int c : g) {
            if (c < 0 || c >= coef_count) throw ConfigError("group member out of range");
            if (first_latent_[c] < 0) first_latent_[c] = static_cast<int>(latent_to_coef_.size());
            latent_to_coef_.push_back(c);
            ++cover[c];
        }
        offsets_.push_back(static_cast<int>(latent_to_coef_.size()));
    };
    for (const auto& g : groups) {
        if (!g.empty()) add_group(g);
    }
    for (int c = 0; c < coef_count; ++c) {
        if (cover[c] == 0) add_group({c});
        if (cover[c] > 1) overlapping_ = true;
    }
}

Vector GroupStructure::to_coef(const Eigen::Ref<const Vector>& latent) const
{
    Vector coef = Vector::Zero(coef_count_);
    for (int j = 0; j < latent_size(); ++j) coef[latent_to_coef_[j]] += latent[j];
    return coef;
}

Vector GroupStructure::to_latent_gradient(const Eigen::Ref<const Vector>& coef_gradient) const
{
    Vector g(latent_size());
    for (int j = 0; j < latent_size(); ++j) g[j] = coef_gradient[latent_to_coef_[j]];
    return g;
}

Vector GroupStructure::from_coef(const Eigen::Ref<const Vector>& coef) const
{
    Vector latent = Vector::Zero(latent_size());
    for (int c = 0; c < coef_count_; ++c) latent[first_latent_[c]] = coef[c];
    return latent;
}

Vector GroupStructure::prox(const Eigen::Ref<const Vector>& latent, double thr) const
{
    Vector out = latent;
    if (thr <= 0.0) return out;
    for (std::size_t g = 0; g + 1 < offsets_.size(); ++g) {
        const int a = offsets_[g];
        const int len = offsets_[g + 1] - a;
        const double norm = out.segment(a, len).norm();
        if (norm <= thr) {
            out.segment(a, len).setZero();
        } else {
            out.segment(a, len) *= 1.0 - thr / norm;
        }
    }
    return out;
}

double GroupStructure::penalty(const Eigen::Ref<const Vector>& latent) const
{
    double s = 0.0;
    for (std::size_t g = 0; g + 1 < offsets_.size(); ++g) {
        s += latent.segment(offsets_[g], offsets_[g + 1] - offsets_[g]).norm();
    }
    return s;
}

}  // namespace varseg::solvers
