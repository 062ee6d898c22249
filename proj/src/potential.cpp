#include "wells/potential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wells/rng.hpp"

namespace wells {

namespace {

// The shared 1D double well V(x) = x^4 - 2x^2 + 0.2x and derivatives.
inline double dw_value(double x) {
    const double x2 = x * x;
    return x2 * x2 - 2.0 * x2 + 0.2 * x;
}
inline double dw_grad(double x) { return 4.0 * x * x * x - 4.0 * x + 0.2; }
inline double dw_hess(double x) { return 12.0 * x * x - 4.0; }

void check_dimension(const PotentialSpec& spec, std::span<const double> x) {
    if (static_cast<int>(x.size()) != spec.dimension)
        throw std::invalid_argument("potential: input has length " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(spec.dimension));
}

struct AnnShape {
    int n1, n2, m;
    int w1, b1, w2, b2, w3;  // offsets into the flattened parameter vector
    explicit AnnShape(const PotentialSpec& s) : n1(s.ann_n1), n2(s.ann_n2), m(s.ann_m) {
        w1 = 0;
        b1 = w1 + 2 * n1;
        w2 = b1 + n1;
        b2 = w2 + n1 * n2;
        w3 = b2 + n2;
        // b3 sits at w3 + n2
    }
};

// Forward/backward workspace for the ANN loss; reused across calls so the
// hot Langevin loop never allocates.
struct AnnWorkspace {
    Vec z1, h1, z2, h2, d2, d1;
    void resize(int n1, int n2) {
        z1.resize(n1);
        h1.resize(n1);
        z2.resize(n2);
        h2.resize(n2);
        d2.resize(n2);
        d1.resize(n1);
    }
};

thread_local AnnWorkspace ann_ws;

double ann_loss_eval(const PotentialSpec& spec, std::span<const double> th, std::span<double> grad,
                     bool want_grad) {
    const AnnShape s(spec);
    auto& ws = ann_ws;
    ws.resize(s.n1, s.n2);
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

    double loss = 0.0;
    for (const AnnTrainingPoint& pt : spec.ann_data) {
        for (int i = 0; i < s.n1; ++i) {
            const double z =
                th[s.w1 + 2 * i] * pt.x[0] + th[s.w1 + 2 * i + 1] * pt.x[1] + th[s.b1 + i];
            ws.z1[i] = z;
            ws.h1[i] = z > 0.0 ? z : 0.0;
        }
        for (int j = 0; j < s.n2; ++j) {
            double z = th[s.b2 + j];
            const double* w2row = th.data() + s.w2 + j * s.n1;
            for (int i = 0; i < s.n1; ++i) z += w2row[i] * ws.h1[i];
            ws.z2[j] = z;
            ws.h2[j] = z > 0.0 ? z : 0.0;
        }
        double y = th[s.w3 + s.n2];
        for (int j = 0; j < s.n2; ++j) y += th[s.w3 + j] * ws.h2[j];

        const double err = y - pt.target;
        loss += err * err;
        if (!want_grad) continue;

        // d loss / d y = 2 (y - target); chain back through both layers.
        const double dy = 2.0 * err;
        grad[s.w3 + s.n2] += dy;
        for (int j = 0; j < s.n2; ++j) {
            grad[s.w3 + j] += dy * ws.h2[j];
            ws.d2[j] = ws.z2[j] > 0.0 ? dy * th[s.w3 + j] : 0.0;
        }
        for (int j = 0; j < s.n2; ++j) {
            const double dj = ws.d2[j];
            if (dj == 0.0) continue;
            grad[s.b2 + j] += dj;
            double* gw2row = grad.data() + s.w2 + j * s.n1;
            for (int i = 0; i < s.n1; ++i) gw2row[i] += dj * ws.h1[i];
        }
        for (int i = 0; i < s.n1; ++i) {
            double di = 0.0;
            if (ws.z1[i] > 0.0)
                for (int j = 0; j < s.n2; ++j) di += ws.d2[j] * th[s.w2 + j * s.n1 + i];
            ws.d1[i] = di;
        }
        for (int i = 0; i < s.n1; ++i) {
            const double di = ws.d1[i];
            if (di == 0.0) continue;
            grad[s.w1 + 2 * i] += di * pt.x[0];
            grad[s.w1 + 2 * i + 1] += di * pt.x[1];
            grad[s.b1 + i] += di;
        }
    }
    return loss;
}

}  // namespace

std::string kind_name(PotentialKind kind) {
    switch (kind) {
        case PotentialKind::LehmerQuadratic: return "lehmer_quadratic";
        case PotentialKind::DoubleWell1D: return "double_well_1d";
        case PotentialKind::InteractingParticles: return "interacting_particles";
        case PotentialKind::Rosenbrock: return "rosenbrock";
        case PotentialKind::AnnLoss: return "ann_loss";
    }
    return "unknown";
}

PotentialSpec PotentialSpec::lehmer(int k) {
    if (k < 1) throw std::invalid_argument("lehmer: k must be >= 1");
    PotentialSpec s;
    s.kind = PotentialKind::LehmerQuadratic;
    s.dimension = k;
    s.lehmer_k = k;
    s.lehmer_a = lehmer_matrix(k);
    return s;
}

PotentialSpec PotentialSpec::double_well() {
    PotentialSpec s;
    s.kind = PotentialKind::DoubleWell1D;
    s.dimension = 1;
    return s;
}

PotentialSpec PotentialSpec::interacting_particles(int n, double sigma) {
    if (n < 1) throw std::invalid_argument("interacting_particles: n must be >= 1");
    if (sigma < 0.0) throw std::invalid_argument("interacting_particles: sigma must be >= 0");
    PotentialSpec s;
    s.kind = PotentialKind::InteractingParticles;
    s.dimension = n;
    s.particles = n;
    s.interaction = sigma;
    return s;
}

PotentialSpec PotentialSpec::rosenbrock(int n, double a, double b) {
    if (n < 2) throw std::invalid_argument("rosenbrock: n must be >= 2");
    if (b <= 0.0) throw std::invalid_argument("rosenbrock: b must be > 0");
    PotentialSpec s;
    s.kind = PotentialKind::Rosenbrock;
    s.dimension = n;
    s.rosen_n = n;
    s.rosen_a = a;
    s.rosen_b = b;
    return s;
}

PotentialSpec PotentialSpec::ann_loss(int n1, int n2, std::uint64_t data_seed, int m) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("ann_loss: layer widths must be >= 1");
    if (m < 1) throw std::invalid_argument("ann_loss: training set size must be >= 1");
    PotentialSpec s;
    s.kind = PotentialKind::AnnLoss;
    s.ann_n1 = n1;
    s.ann_n2 = n2;
    s.ann_seed = data_seed;
    s.ann_m = m;
    s.dimension = ann_dimension(n1, n2);
    s.ann_data = build_ann_training_set(data_seed, m);
    return s;
}

int ann_dimension(int n1, int n2) { return n1 * n2 + 3 * n1 + 2 * n2 + 1; }

std::vector<AnnTrainingPoint> build_ann_training_set(std::uint64_t seed, int m) {
    if (m < 1) throw std::invalid_argument("build_ann_training_set: m must be >= 1");
    std::vector<AnnTrainingPoint> data(m);
    Rng rng(seed, 0);
    for (auto& pt : data) {
        pt.x[0] = rng.uniform(-1.0, 1.0);
        pt.x[1] = rng.uniform(-1.0, 1.0);
        pt.target = pt.x[0] * pt.x[0] + pt.x[1] * pt.x[1];
    }
    return data;
}

Matrix lehmer_matrix(int k) {
    if (k < 1) throw std::invalid_argument("lehmer_matrix: k must be >= 1");
    Matrix a(k);
    for (int i = 1; i <= k; ++i)
        for (int j = 1; j <= k; ++j)
            a(i - 1, j - 1) = static_cast<double>(std::min(i, j)) / std::max(i, j);
    return a;
}

double least_eigenvalue(const Matrix& a) {
    if (a.n < 1) throw std::invalid_argument("least_eigenvalue: empty matrix");
    if (!a.symmetric(1e-10)) throw std::invalid_argument("least_eigenvalue: matrix not symmetric");

    const int n = a.n;
    // generic start direction; a constant vector can sit exactly on a
    // non-extremal eigenvector (it does for the 2x2 Lehmer matrix)
    Vec v(n), w(n), av(n);
    for (int i = 0; i < n; ++i) v[i] = 1.0 + std::sin(1.0 + i);
    const double vn0 = norm(v);
    for (int i = 0; i < n; ++i) v[i] /= vn0;
    double lambda = 0.0;
    for (int iter = 0; iter < 100000; ++iter) {
        lu_solve(a, v, w);
        const double wn = norm(w);
        if (!(wn > 0.0)) throw std::runtime_error("least_eigenvalue: iteration collapsed");
        for (int i = 0; i < n; ++i) v[i] = w[i] / wn;
        a.multiply(v, av);
        const double next = dot(v, av);
        if (iter > 0 && std::abs(next - lambda) < 1e-10 * std::max(1.0, std::abs(next)))
            return next;
        lambda = next;
    }
    return lambda;
}

double value(const PotentialSpec& spec, std::span<const double> x) {
    check_dimension(spec, x);
    switch (spec.kind) {
        case PotentialKind::LehmerQuadratic: {
            double s = 0.0;
            for (int i = 0; i < spec.lehmer_k; ++i) {
                double row = 0.0;
                for (int j = 0; j < spec.lehmer_k; ++j) row += spec.lehmer_a(i, j) * x[j];
                s += x[i] * row;
            }
            return 0.5 * s;
        }
        case PotentialKind::DoubleWell1D: return dw_value(x[0]);
        case PotentialKind::InteractingParticles: {
            double s = 0.0;
            for (int i = 0; i < spec.particles; ++i) s += dw_value(x[i]);
            // pairwise quadratic attraction over unordered pairs
            double inter = 0.0;
            for (int i = 0; i < spec.particles; ++i)
                for (int j = i + 1; j < spec.particles; ++j) {
                    const double d = x[i] - x[j];
                    inter += d * d;
                }
            return s + spec.interaction * inter;
        }
        case PotentialKind::Rosenbrock: {
            double s = 0.0;
            for (int i = 0; i + 1 < spec.rosen_n; ++i) {
                const double t1 = x[i + 1] - x[i] * x[i];
                const double t2 = spec.rosen_a - x[i];
                s += spec.rosen_b * t1 * t1 + t2 * t2;
            }
            return s;
        }
        case PotentialKind::AnnLoss: return ann_loss_eval(spec, x, {}, false);
    }
    throw std::logic_error("value: unhandled kind");
}

void gradient_into(const PotentialSpec& spec, std::span<const double> x, std::span<double> out) {
    check_dimension(spec, x);
    if (out.size() != x.size()) throw std::invalid_argument("gradient: output size mismatch");
    switch (spec.kind) {
        case PotentialKind::LehmerQuadratic: spec.lehmer_a.multiply(x, out); return;
        case PotentialKind::DoubleWell1D: out[0] = dw_grad(x[0]); return;
        case PotentialKind::InteractingParticles: {
            const int n = spec.particles;
            double sum = 0.0;
            for (int i = 0; i < n; ++i) sum += x[i];
            for (int i = 0; i < n; ++i)
                out[i] = dw_grad(x[i]) + 2.0 * spec.interaction * (n * x[i] - sum);
            return;
        }
        case PotentialKind::Rosenbrock: {
            const int n = spec.rosen_n;
            const double a = spec.rosen_a, b = spec.rosen_b;
            std::fill(out.begin(), out.end(), 0.0);
            for (int i = 0; i + 1 < n; ++i) {
                const double t1 = x[i + 1] - x[i] * x[i];
                out[i] += -4.0 * b * x[i] * t1 - 2.0 * (a - x[i]);
                out[i + 1] += 2.0 * b * t1;
            }
            return;
        }
        case PotentialKind::AnnLoss: ann_loss_eval(spec, x, out, true); return;
    }
    throw std::logic_error("gradient: unhandled kind");
}

Vec gradient(const PotentialSpec& spec, std::span<const double> x) {
    Vec out(x.size());
    gradient_into(spec, x, out);
    return out;
}

CriticalPointSet find_critical_points_1d(const PotentialSpec& spec) {
    if (spec.dimension != 1)
        throw std::invalid_argument("find_critical_points_1d: potential is not one-dimensional");

    auto deriv = [&](double x) { return gradient(spec, std::span<const double>(&x, 1))[0]; };

    // Bracket sign changes of U' on a fine grid, then bisect each bracket.
    const double lo = -3.0, hi = 3.0;
    const int cells = 6000;
    std::vector<double> roots;
    double prev_x = lo, prev_f = deriv(lo);
    for (int i = 1; i <= cells; ++i) {
        const double cx = lo + (hi - lo) * i / cells;
        const double cf = deriv(cx);
        if (prev_f == 0.0) roots.push_back(prev_x);
        if (prev_f * cf < 0.0) {
            double a = prev_x, b = cx, fa = prev_f;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a + b);
                const double fm = deriv(mid);
                if (fa * fm <= 0.0)
                    b = mid;
                else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        prev_x = cx;
        prev_f = cf;
    }

    CriticalPointSet set;
    for (double r : roots) {
        CriticalPoint p{Vec{r}, value(spec, std::span<const double>(&r, 1))};
        if (dw_hess(r) > 0.0)
            set.minima.push_back(std::move(p));
        else
            set.saddles.push_back(std::move(p));
    }
    std::sort(set.minima.begin(), set.minima.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return a.value < b.value; });
    return set;
}

Vec descend(const PotentialSpec& spec, std::span<const double> x, const DescentConfig& cfg,
            std::optional<DescentError>* err) {
    Vec z(x.begin(), x.end()), g(x.size());
    if (err) err->reset();
    for (long it = 0; it < cfg.max_iters; ++it) {
        gradient_into(spec, z, g);
        if (norm(g) < cfg.grad_tol) return z;
        axpy(-cfg.step, g, z);
        if (!all_finite(z)) {
            if (err) *err = DescentError{z, it};
            return z;
        }
    }
    if (err) *err = DescentError{z, cfg.max_iters};
    return z;
}

CriticalPointSet known_minima(const PotentialSpec& spec) {
    CriticalPointSet set;
    auto add = [&](Vec pos) {
        for (const auto& m : set.minima)
            if (dist(m.position, pos) < 1e-4) return;
        const double v = value(spec, pos);
        set.minima.push_back({std::move(pos), v});
    };
    switch (spec.kind) {
        case PotentialKind::LehmerQuadratic: add(Vec(spec.dimension, 0.0)); break;
        case PotentialKind::DoubleWell1D: return find_critical_points_1d(spec);
        case PotentialKind::InteractingParticles: {
            const int n = spec.particles;
            DescentConfig cfg;
            for (int mask = 0; mask < (1 << n); ++mask) {
                Vec corner(n);
                for (int i = 0; i < n; ++i) corner[i] = (mask >> i) & 1 ? 1.0 : -1.0;
                std::optional<DescentError> err;
                Vec lim = descend(spec, corner, cfg, &err);
                if (!err) add(std::move(lim));
            }
            break;
        }
        case PotentialKind::Rosenbrock: {
            DescentConfig cfg;
            cfg.step = 1e-4;  // Rosenbrock curvature along the valley wall is stiff
            Vec global(spec.dimension, spec.rosen_a);
            add(descend(spec, global, cfg, nullptr));
            Vec other(spec.dimension, 1.0);
            other[0] = -1.0;
            std::optional<DescentError> err;
            Vec lim = descend(spec, other, cfg, &err);
            if (!err) add(std::move(lim));
            break;
        }
        case PotentialKind::AnnLoss: break;
    }
    std::sort(set.minima.begin(), set.minima.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return a.value < b.value; });
    return set;
}

BasinResult classify_basin(const PotentialSpec& spec, std::span<const double> x,
                           const DescentConfig& descent_cfg, const CriticalPointSet& minima) {
    if (!all_finite(x)) throw std::invalid_argument("classify_basin: input not finite");
    if (minima.minima.empty()) throw std::invalid_argument("classify_basin: no known minima");

    BasinResult res;
    std::optional<DescentError> err;
    res.limit = descend(spec, x, descent_cfg, &err);
    res.divergence = err;

    int best = 0;
    double best_d = dist(res.limit, minima.minima[0].position);
    for (int i = 1; i < static_cast<int>(minima.minima.size()); ++i) {
        const double d = dist(res.limit, minima.minima[i].position);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    res.label = best + 1;
    return res;
}

BasinResult classify_basin(const PotentialSpec& spec, std::span<const double> x,
                           const DescentConfig& descent_cfg) {
    return classify_basin(spec, x, descent_cfg, known_minima(spec));
}

bool ips_in_low_basin_union(const PotentialSpec& spec, std::span<const double> x) {
    // The excluded region (the all-right basin) is where every coordinate
    // either already sits right of 0.11 or is in [0, 0.11) moving right.
    thread_local Vec g;
    g.resize(x.size());
    bool grad_ready = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.11) continue;
        if (x[i] >= 0.0) {
            if (!grad_ready) {
                gradient_into(spec, x, g);
                grad_ready = true;
            }
            if (-g[i] > 0.0) continue;
        }
        return true;
    }
    return false;
}

}  // namespace wells
