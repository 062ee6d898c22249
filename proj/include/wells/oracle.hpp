// Ground-truth barrier computations, independent of the coupling pipeline:
// minimax path search on a sampled grid for low dimension, and the
// simplified string method for minimum energy paths in any dimension.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "wells/potential.hpp"
#include "wells/vec.hpp"

namespace wells {

struct GridAxis {
    double lo = 0.0;
    double hi = 0.0;
    int resolution = 0;  // number of nodes, >= 3
};

// Tensor grid with U sampled at every node. Neighbors along each axis;
// diagonal adjacency optional (it only changes the discretization error
// constant).
struct GridGraph {
    std::vector<GridAxis> axes;
    std::vector<double> values;  // row-major over axes
    bool diagonals = false;

    int dimension() const { return static_cast<int>(axes.size()); }
    long node_count() const;
    long node_of(std::span<const double> x) const;  // nearest node
    Vec position_of(long node) const;
};

// Samples U on the grid; node evaluation is parallelized by blocks.
GridGraph build_grid(const PotentialSpec& spec, const std::vector<GridAxis>& axes,
                     bool diagonals = false, int workers = 0);

// Communication height between node sets A and B: minimum over paths of
// the maximum node value, found by priority-queue relaxation with max in
// place of sum. Throws if B is unreachable from A.
double communication_height_grid(const GridGraph& grid, const std::vector<long>& a,
                                 const std::vector<long>& b);

// Essential barrier height from grid minimax: computes both
//   max_i { Phi(x_i, x_1) - U(x_i) }            (direct form)
//   max_i { Phi(x_i, {x_1..x_{i-1}}) - U(x_i) } (equivalent form)
// and checks they agree before returning the direct value. Minima must be
// sorted ascending by value (the global minimum first); a single minimum
// yields 0 by convention.
double essential_barrier_height_grid(const GridGraph& grid, const CriticalPointSet& minima,
                                     double agreement_tol = 1e-9);

struct StringPath {
    std::vector<Vec> images;    // uniform arc-length spacing, endpoints fixed
    std::vector<double> energies;
    bool converged = false;
    int iterations = 0;
    double final_displacement = 0.0;

    std::vector<double> arc_lengths() const;  // cumulative, starting at 0
};

struct StringConfig {
    int images = 64;
    double step = 1e-2;
    long max_iters = 200000;
    double tol = 1e-10;  // max per-image displacement per iteration
    // optional interior anchors for the initial polyline; needed when the
    // straight segment lies on an invariant subspace (a symmetric system's
    // all-together diagonal) that the string dynamics cannot leave
    std::vector<Vec> waypoints;
};

// Simplified string method: alternate one explicit-Euler descent step on
// every interior image with a piecewise-linear reparameterization to
// uniform arc length. Endpoints stay at the two supplied minima.
StringPath string_method(const PotentialSpec& spec, const Vec& start, const Vec& end,
                         const StringConfig& cfg);

struct PathBarrier {
    int peak_index = 0;
    double peak_energy = 0.0;
    double ascent = 0.0;   // peak minus the preceding local minimum
    double descent = 0.0;  // peak minus the following local minimum
};

// Local maxima of the energy profile along the path with their heights
// relative to the adjacent local minima. Empty for a monotone profile.
std::vector<PathBarrier> barriers_along_path(const StringPath& path);

// Essential barrier restricted to this path: for every local minimum of
// the profile, the highest energy between it and the lower-energy endpoint
// minus its own energy, maximized over minima.
double essential_barrier_along_path(const StringPath& path);

// A few Newton steps on grad U = 0 with a finite-difference Hessian,
// used to sharpen saddle locations found by grid or string search.
Vec refine_saddle(const PotentialSpec& spec, const Vec& x0, int max_iters = 50,
                  double grad_tol = 1e-10);

// Interior minima forming a one-coordinate-at-a-time route between two
// sign-symmetric endpoints: waypoint k flips the last k coordinates from
// the start's sign to the end's. Empty when no matching minima exist.
std::vector<Vec> sign_staircase_waypoints(const CriticalPointSet& minima, const Vec& start,
                                          const Vec& end);

}  // namespace wells
