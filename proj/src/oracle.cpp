#include "wells/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <thread>

namespace wells {

long GridGraph::node_count() const {
    long n = 1;
    for (const auto& ax : axes) n *= ax.resolution;
    return n;
}

long GridGraph::node_of(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dimension())
        throw std::invalid_argument("grid: point dimension mismatch");
    long idx = 0;
    for (int d = 0; d < dimension(); ++d) {
        const auto& ax = axes[d];
        const double spacing = (ax.hi - ax.lo) / (ax.resolution - 1);
        long i = std::lround((x[d] - ax.lo) / spacing);
        i = std::clamp<long>(i, 0, ax.resolution - 1);
        idx = idx * ax.resolution + i;
    }
    return idx;
}

Vec GridGraph::position_of(long node) const {
    Vec x(dimension());
    for (int d = dimension() - 1; d >= 0; --d) {
        const auto& ax = axes[d];
        const long i = node % ax.resolution;
        node /= ax.resolution;
        x[d] = ax.lo + i * (ax.hi - ax.lo) / (ax.resolution - 1);
    }
    return x;
}

GridGraph build_grid(const PotentialSpec& spec, const std::vector<GridAxis>& axes, bool diagonals,
                     int workers) {
    if (static_cast<int>(axes.size()) != spec.dimension)
        throw std::invalid_argument("build_grid: axes must match the potential dimension");
    for (const auto& ax : axes) {
        if (ax.resolution < 3) throw std::invalid_argument("build_grid: resolution must be >= 3");
        if (!(ax.hi > ax.lo)) throw std::invalid_argument("build_grid: need hi > lo");
    }
    GridGraph grid;
    grid.axes = axes;
    grid.diagonals = diagonals;
    const long n = grid.node_count();
    grid.values.resize(n);

    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, 16));

    auto eval_range = [&](long begin, long end) {
        Vec x(spec.dimension);
        for (long node = begin; node < end; ++node) {
            long rest = node;
            for (int d = spec.dimension - 1; d >= 0; --d) {
                const auto& ax = grid.axes[d];
                const long i = rest % ax.resolution;
                rest /= ax.resolution;
                x[d] = ax.lo + i * (ax.hi - ax.lo) / (ax.resolution - 1);
            }
            grid.values[node] = value(spec, x);
        }
    };

    if (workers == 1 || n < 4096) {
        eval_range(0, n);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const long begin = w * chunk;
            const long end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(eval_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    for (double v : grid.values)
        if (!std::isfinite(v)) throw std::runtime_error("build_grid: non-finite node value");
    return grid;
}

namespace {

// Enumerates neighbors of `node`; axis steps always, full diagonal moves
// when enabled.
template <class Fn>
void for_each_neighbor(const GridGraph& grid, long node, Fn&& fn) {
    const int dim = grid.dimension();
    long coords[8];
    long rest = node;
    for (int d = dim - 1; d >= 0; --d) {
        coords[d] = rest % grid.axes[d].resolution;
        rest /= grid.axes[d].resolution;
    }
    if (!grid.diagonals) {
        long stride = 1;
        for (int d = dim - 1; d >= 0; --d) {
            if (coords[d] + 1 < grid.axes[d].resolution) fn(node + stride);
            if (coords[d] > 0) fn(node - stride);
            stride *= grid.axes[d].resolution;
        }
        return;
    }
    // 3^dim - 1 moves
    long deltas[8] = {0};
    const long total = static_cast<long>(std::pow(3.0, dim) + 0.5);
    for (long code = 0; code < total; ++code) {
        long c = code;
        bool ok = true, all_zero = true;
        long neighbor = 0;
        for (int d = 0; d < dim; ++d) {
            deltas[d] = c % 3 - 1;
            c /= 3;
            const long nd = coords[d] + deltas[d];
            if (nd < 0 || nd >= grid.axes[d].resolution) {
                ok = false;
                break;
            }
            if (deltas[d] != 0) all_zero = false;
            neighbor = neighbor * grid.axes[d].resolution + nd;
        }
        if (ok && !all_zero) fn(neighbor);
    }
}

}  // namespace

double communication_height_grid(const GridGraph& grid, const std::vector<long>& a,
                                 const std::vector<long>& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("communication_height_grid: empty node set");
    const long n = grid.node_count();
    std::vector<char> in_b(n, 0);
    for (long node : b) {
        if (node < 0 || node >= n) throw std::invalid_argument("communication_height_grid: bad node");
        in_b[node] = 1;
    }
    for (long node : a)
        if (in_b[node]) return grid.values[node];  // overlapping sets: trivial path

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(n, kInf);
    using Item = std::pair<double, long>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    for (long node : a) {
        if (node < 0 || node >= n) throw std::invalid_argument("communication_height_grid: bad node");
        if (grid.values[node] < cost[node]) {
            cost[node] = grid.values[node];
            heap.push({cost[node], node});
        }
    }
    while (!heap.empty()) {
        const auto [c, u] = heap.top();
        heap.pop();
        if (c > cost[u]) continue;
        if (in_b[u]) return c;  // min-heap pops in nondecreasing minimax cost
        for_each_neighbor(grid, u, [&](long v) {
            const double nc = std::max(c, grid.values[v]);
            if (nc < cost[v]) {
                cost[v] = nc;
                heap.push({nc, v});
            }
        });
    }
    throw std::runtime_error("communication_height_grid: target set unreachable");
}

double essential_barrier_height_grid(const GridGraph& grid, const CriticalPointSet& minima,
                                     double agreement_tol) {
    const int count = static_cast<int>(minima.minima.size());
    if (count == 0) throw std::invalid_argument("essential_barrier_height_grid: no minima");
    // ascending by value; exact ties are allowed (symmetric landscapes
    // carry permutation-degenerate minima)
    for (int i = 1; i < count; ++i)
        if (minima.minima[i].value < minima.minima[i - 1].value - 1e-12)
            throw std::invalid_argument(
                "essential_barrier_height_grid: minima must be sorted ascending by value");
    if (count == 1) return 0.0;  // no barrier by convention

    std::vector<long> nodes(count);
    for (int i = 0; i < count; ++i) nodes[i] = grid.node_of(minima.minima[i].position);

    double direct = -std::numeric_limits<double>::infinity();
    double chained = -std::numeric_limits<double>::infinity();
    for (int i = 1; i < count; ++i) {
        const double u_i = grid.values[nodes[i]];
        const double phi_1 =
            communication_height_grid(grid, {nodes[i]}, {nodes[0]});
        direct = std::max(direct, phi_1 - u_i);
        const std::vector<long> lower(nodes.begin(), nodes.begin() + i);
        const double phi_lower = communication_height_grid(grid, {nodes[i]}, lower);
        chained = std::max(chained, phi_lower - u_i);
    }
    if (std::abs(direct - chained) > agreement_tol)
        throw std::runtime_error(
            "essential_barrier_height_grid: direct and chained forms disagree beyond tolerance");
    return direct;
}

std::vector<double> StringPath::arc_lengths() const {
    std::vector<double> s(images.size(), 0.0);
    for (std::size_t i = 1; i < images.size(); ++i)
        s[i] = s[i - 1] + dist(images[i - 1], images[i]);
    return s;
}

namespace {

// Piecewise-linear resampling of the polyline through `images` at uniform
// arc length, endpoints untouched.
void reparameterize(std::vector<Vec>& images, std::vector<Vec>& scratch) {
    const int p = static_cast<int>(images.size());
    const int dim = static_cast<int>(images.front().size());
    std::vector<double> s(p, 0.0);
    for (int i = 1; i < p; ++i) s[i] = s[i - 1] + dist(images[i - 1], images[i]);
    const double total = s[p - 1];
    if (!(total > 0.0)) return;  // fully collapsed path

    scratch.resize(p);
    int seg = 0;
    for (int i = 0; i < p; ++i) {
        const double target = total * i / (p - 1);
        while (seg + 2 < p && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double f = len > 0.0 ? (target - s[seg]) / len : 0.0;
        Vec& out = scratch[i];
        out.resize(dim);
        for (int dd = 0; dd < dim; ++dd)
            out[dd] = images[seg][dd] + f * (images[seg + 1][dd] - images[seg][dd]);
    }
    scratch.front() = images.front();
    scratch.back() = images.back();
    images.swap(scratch);
}

}  // namespace

StringPath string_method(const PotentialSpec& spec, const Vec& start, const Vec& end,
                         const StringConfig& cfg) {
    if (cfg.images < 3) throw std::invalid_argument("string_method: need at least 3 images");
    if (static_cast<int>(start.size()) != spec.dimension ||
        static_cast<int>(end.size()) != spec.dimension)
        throw std::invalid_argument("string_method: endpoint dimension mismatch");

    StringPath path;
    path.images.resize(cfg.images);
    const int dim = spec.dimension;
    std::vector<Vec> nodes;
    nodes.push_back(start);
    for (const Vec& w : cfg.waypoints) {
        if (static_cast<int>(w.size()) != dim)
            throw std::invalid_argument("string_method: waypoint dimension mismatch");
        nodes.push_back(w);
    }
    nodes.push_back(end);

    // sample the initial polyline at uniform arc length
    std::vector<double> s(nodes.size(), 0.0);
    for (std::size_t i = 1; i < nodes.size(); ++i)
        s[i] = s[i - 1] + dist(nodes[i - 1], nodes[i]);
    const double total = s.back();
    for (int i = 0; i < cfg.images; ++i) {
        path.images[i].resize(dim);
        const double target = total * i / (cfg.images - 1);
        std::size_t seg = 0;
        while (seg + 2 < nodes.size() && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double f = len > 0.0 ? (target - s[seg]) / len : 0.0;
        for (int d = 0; d < dim; ++d)
            path.images[i][d] = nodes[seg][d] + f * (nodes[seg + 1][d] - nodes[seg][d]);
    }
    path.images.front() = start;
    path.images.back() = end;

    std::vector<Vec> previous(cfg.images), scratch;
    Vec g(dim);
    for (long iter = 1; iter <= cfg.max_iters; ++iter) {
        previous = path.images;
        // (a) one descent step on every interior image
        for (int i = 1; i + 1 < cfg.images; ++i) {
            gradient_into(spec, path.images[i], g);
            axpy(-cfg.step, g, path.images[i]);
        }
        // (b) uniform arc-length reparameterization
        reparameterize(path.images, scratch);

        double disp = 0.0;
        for (int i = 0; i < cfg.images; ++i)
            disp = std::max(disp, dist(path.images[i], previous[i]));
        path.iterations = static_cast<int>(iter);
        path.final_displacement = disp;
        if (disp < cfg.tol) {
            path.converged = true;
            break;
        }
    }

    path.energies.resize(cfg.images);
    for (int i = 0; i < cfg.images; ++i) path.energies[i] = value(spec, path.images[i]);
    return path;
}

std::vector<PathBarrier> barriers_along_path(const StringPath& path) {
    const auto& e = path.energies;
    const int p = static_cast<int>(e.size());
    std::vector<PathBarrier> out;
    if (p < 3) return out;

    // local minima of the profile, endpoints included
    std::vector<int> mins;
    if (e[0] < e[1]) mins.push_back(0);
    for (int i = 1; i + 1 < p; ++i)
        if (e[i] <= e[i - 1] && e[i] < e[i + 1]) mins.push_back(i);
    if (e[p - 1] < e[p - 2]) mins.push_back(p - 1);

    for (std::size_t k = 0; k + 1 < mins.size(); ++k) {
        const int a = mins[k], b = mins[k + 1];
        int peak = a;
        for (int i = a; i <= b; ++i)
            if (e[i] > e[peak]) peak = i;
        if (peak == a || peak == b) continue;  // monotone stretch
        PathBarrier bar;
        bar.peak_index = peak;
        bar.peak_energy = e[peak];
        bar.ascent = e[peak] - e[a];
        bar.descent = e[peak] - e[b];
        out.push_back(bar);
    }
    return out;
}

double essential_barrier_along_path(const StringPath& path) {
    const auto& e = path.energies;
    const int p = static_cast<int>(e.size());
    if (p < 3) return 0.0;
    const bool global_at_front = e.front() <= e.back();

    // walk from the far end toward the global end, tracking the highest
    // energy still ahead of each profile minimum
    std::vector<int> order(p);
    for (int i = 0; i < p; ++i) order[i] = global_at_front ? p - 1 - i : i;

    double best = 0.0;
    double peak_ahead = -std::numeric_limits<double>::infinity();
    // iterate from the global end backwards so peak_ahead is the max
    // energy between the current index and the global end
    for (int j = p - 1; j >= 0; --j) {
        const int i = order[j];
        const double ei = e[i];
        const bool is_min =
            (i == 0 && ei < e[1]) || (i == p - 1 && ei < e[p - 2]) ||
            (i > 0 && i + 1 < p && ei <= e[i - 1] && ei < e[i + 1]);
        if (is_min && peak_ahead > ei) best = std::max(best, peak_ahead - ei);
        peak_ahead = std::max(peak_ahead, ei);
    }
    return best;
}

std::vector<Vec> sign_staircase_waypoints(const CriticalPointSet& minima, const Vec& start,
                                          const Vec& end) {
    const int dim = static_cast<int>(start.size());
    std::vector<Vec> out;
    for (int k = 1; k < dim; ++k) {
        // last k coordinates already carry the end's sign
        for (const auto& m : minima.minima) {
            if (static_cast<int>(m.position.size()) != dim) continue;
            bool match = true;
            for (int d = 0; d < dim && match; ++d) {
                const double want = d < dim - k ? start[d] : end[d];
                match = m.position[d] * want > 0.0;
            }
            if (match) {
                out.push_back(m.position);
                break;
            }
        }
    }
    return out;
}

Vec refine_saddle(const PotentialSpec& spec, const Vec& x0, int max_iters, double grad_tol) {
    const int dim = spec.dimension;
    Vec x = x0, g(dim), step;
    Matrix hess(dim);
    Vec xp(dim), xm(dim), gp(dim), gm(dim);
    for (int iter = 0; iter < max_iters; ++iter) {
        gradient_into(spec, x, g);
        if (norm(g) < grad_tol) return x;
        const double delta = 1e-6 * (1.0 + norm(x));
        for (int j = 0; j < dim; ++j) {
            xp = x;
            xm = x;
            xp[j] += delta;
            xm[j] -= delta;
            gradient_into(spec, xp, gp);
            gradient_into(spec, xm, gm);
            for (int i = 0; i < dim; ++i) hess(i, j) = (gp[i] - gm[i]) / (2.0 * delta);
        }
        // symmetrize before solving
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) {
                const double v = 0.5 * (hess(i, j) + hess(j, i));
                hess(i, j) = v;
                hess(j, i) = v;
            }
        lu_solve(hess, g, step);
        for (int i = 0; i < dim; ++i) x[i] -= step[i];
        if (!all_finite(x)) throw std::runtime_error("refine_saddle: diverged");
    }
    return x;
}

}  // namespace wells
