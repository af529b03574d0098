#pragma once

#include "varseg/core.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace varseg::datagen {

enum class Method { sparse, group_sparse, fixed_lowrank_sparse, lowrank_sparse };

enum class PatternKind { off_diagonal, diagonal, random };

struct SparsityPattern {
    PatternKind kind = PatternKind::off_diagonal;
    /// Edge probabilities for the random pattern: one value, one per segment,
    /// or one per (segment, lag) in segment-major order.
    std::vector<double> density;
};

struct GenerationSpec {
    Method method = Method::sparse;
    int T = 0;
    int p = 0;
    int q = 1;
    /// Per-segment lags; segments with fewer lags get zero higher lags.
    std::vector<int> lags_vector;
    /// Change points followed by T + 1.
    std::vector<int> break_points;
    SparsityPattern pattern;
    /// Nonzero magnitudes. Sparse and group methods: one per segment, or one
    /// per (segment, lag) in segment-major order. Low-rank methods: one per
    /// segment (the sparse component's signal).
    std::vector<double> signals;
    GroupOrientation group_type = GroupOrientation::column;
    /// 1-based flat indices (lag - 1) * p + column (or row) of the dense
    /// columns (rows); the nesting into lists carries no meaning.
    std::vector<std::vector<int>> group_index;
    std::vector<int> rank;
    std::vector<double> singular_vals;
    std::vector<double> info_ratio;
    double spectral_radius = 0.9;
    int skip = 50;
    std::uint64_t seed = 1;
    /// Noise standard deviation sigma_j per segment (one value broadcasts).
    std::vector<double> noise_scales{1.0};
    /// Caller-supplied transition matrices, bypassing pattern generation.
    std::optional<std::vector<TransitionSet>> transitions;

    int segment_count() const { return static_cast<int>(break_points.size()); }
    int max_lag() const;
    int lag_of_segment(int j) const;
    void validate() const;
};

struct Simulation {
    TimeSeries series;
    Matrix noise;  ///< T x p, scaled noise actually added
    PiecewiseVarModel model;
    /// Low-rank and sparse parts (lag 1) for the two low-rank methods.
    std::vector<Matrix> lowrank;
    std::vector<Matrix> sparse;
};

/// Generator for stream `stream` of the given seed. Streams are
/// independent: structure of segment j uses stream j, the common low-rank
/// factor uses stream 1000, and the noise process uses stream 2000.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

std::vector<TransitionSet> gen_sparse_transitions(const GenerationSpec& spec);
std::vector<TransitionSet> gen_group_sparse_transitions(const GenerationSpec& spec);

/// U diag(singular_vals[0..r)) V' with random orthonormal p x r frames.
Matrix gen_lowrank_component(int p, int r, const std::vector<double>& singular_vals, std::mt19937_64& rng);

/// c L with ||c L||_max / ||S||_max = gamma.
Matrix apply_info_ratio(const Matrix& l, const Matrix& s, double gamma);

/// Factor c in (0, 1] so that c * ts has companion radius below rho; 1 when
/// the set is already stable at rho.
double stabilizing_factor(const TransitionSet& ts, double rho);
TransitionSet stabilize(const TransitionSet& ts, double rho);

Simulation simulate(const GenerationSpec& spec);

/// Runs the recursion with given transitions, noise scales and segment
/// boundaries; exposed for tests and for replaying a stored model.
Simulation simulate_model(const PiecewiseVarModel& model, int T, int skip, std::uint64_t seed);

}  // namespace varseg::datagen
