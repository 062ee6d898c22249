// Differentiable test landscapes and basin classification.
//
// Five built-in potentials: a Lehmer-matrix quadratic form, the asymmetric
// 1D double well x^4 - 2x^2 + 0.2x, a 3-particle interacting system on that
// double well, the Rosenbrock function, and the squared-error loss of a
// small two-hidden-layer ReLU network.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wells/vec.hpp"

namespace wells {

enum class PotentialKind {
    LehmerQuadratic,
    DoubleWell1D,
    InteractingParticles,
    Rosenbrock,
    AnnLoss,
};

std::string kind_name(PotentialKind kind);

struct AnnTrainingPoint {
    double x[2];
    double target;
};

// Immutable description of one potential, including any precomputed data
// (Lehmer matrix, ANN training set). Cheap to copy by shared value; all
// evaluation entry points are pure functions of (spec, x).
struct PotentialSpec {
    PotentialKind kind = PotentialKind::DoubleWell1D;
    int dimension = 1;

    // LehmerQuadratic
    int lehmer_k = 0;
    Matrix lehmer_a;

    // InteractingParticles
    int particles = 0;
    double interaction = 0.0;

    // Rosenbrock
    int rosen_n = 0;
    double rosen_a = 1.0;
    double rosen_b = 20.0;

    // AnnLoss
    int ann_n1 = 0;
    int ann_n2 = 0;
    std::uint64_t ann_seed = 0;
    int ann_m = 0;
    std::vector<AnnTrainingPoint> ann_data;

    static PotentialSpec lehmer(int k);
    static PotentialSpec double_well();
    static PotentialSpec interacting_particles(int n, double sigma);
    static PotentialSpec rosenbrock(int n, double a, double b);
    static PotentialSpec ann_loss(int n1, int n2, std::uint64_t data_seed, int m = 100);
};

// U(x). Throws std::invalid_argument on a dimension mismatch.
double value(const PotentialSpec& spec, std::span<const double> x);

// grad U(x) into `out` (same length as x). The AnnLoss backward pass uses
// the subgradient convention ReLU'(0) = 0.
void gradient_into(const PotentialSpec& spec, std::span<const double> x, std::span<double> out);

Vec gradient(const PotentialSpec& spec, std::span<const double> x);

// k x k Lehmer matrix, entries min(i,j)/max(i,j) with 1-based indices.
Matrix lehmer_matrix(int k);

// Smallest eigenvalue of a symmetric matrix by inverse power iteration
// (shift 0, convergence threshold 1e-10).
double least_eigenvalue(const Matrix& a);

struct CriticalPoint {
    Vec position;
    double value = 0.0;
};

// Minima sorted so U(x1) < U(x2) < ...; label of minimum i is i+1.
struct CriticalPointSet {
    std::vector<CriticalPoint> minima;
    std::vector<CriticalPoint> saddles;
};

// The three roots of U' = 0 for the built-in double well, located by
// bisection on a bracketing grid and classified by the sign of U''.
CriticalPointSet find_critical_points_1d(const PotentialSpec& spec);

// Known minima per kind, used as descent targets by classify_basin:
// Lehmer -> origin; DoubleWell1D -> the two analytic minima;
// InteractingParticles -> descent from the 2^n sign corners (deduplicated);
// Rosenbrock -> descent from (1,...,1) and (-1,1,...,1). AnnLoss has no
// canonical minima and returns an empty set.
CriticalPointSet known_minima(const PotentialSpec& spec);

struct DescentConfig {
    double step = 1e-3;
    double grad_tol = 1e-8;
    long max_iters = 10'000'000;
};

struct DescentError {
    Vec last_iterate;
    long iterations = 0;
};

struct BasinResult {
    int label = 0;  // 1-based index into the sorted minima
    Vec limit;
    std::optional<DescentError> divergence;
};

// Deterministic gradient descent (explicit Euler on the negative gradient
// flow) until |grad| < tol, then the index of the nearest known minimum.
BasinResult classify_basin(const PotentialSpec& spec, std::span<const double> x,
                           const DescentConfig& descent, const CriticalPointSet& minima);

BasinResult classify_basin(const PotentialSpec& spec, std::span<const double> x,
                           const DescentConfig& descent = {});

// Deterministic descent to the nearest critical point reachable by the
// negative gradient flow from x.
Vec descend(const PotentialSpec& spec, std::span<const double> x, const DescentConfig& cfg,
            std::optional<DescentError>* err = nullptr);

// Membership test for the union of "low" basins of the interacting-particle
// system (the complement of the basin around the all-right minimum):
// a point is OUTSIDE that union iff for every coordinate either x_i > 0.11,
// or 0 <= x_i < 0.11 with -dU/dx_i > 0.
bool ips_in_low_basin_union(const PotentialSpec& spec, std::span<const double> x);

// Deterministic training set for the ANN loss: M inputs uniform on
// [-1,1]^2 with targets |x|^2.
std::vector<AnnTrainingPoint> build_ann_training_set(std::uint64_t seed, int m);

// Parameter-vector length of the two-hidden-layer network:
// N1*N2 + 3*N1 + 2*N2 + 1 (layout W1, b1, W2, b2, W3, b3, row-major).
int ann_dimension(int n1, int n2);

}  // namespace wells
