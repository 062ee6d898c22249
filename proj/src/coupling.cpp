#include "wells/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace wells {

namespace {

// ---------------------------------------------------------------------------
// Potential policies: zero-overhead gradient evaluation in the hot loop.
// The math below must match gradient_into() for every kind; unit tests pin
// the two paths against each other.
// ---------------------------------------------------------------------------

struct PotDoubleWell {
    int dim = 1;
    void operator()(const double* x, double* g) const {
        g[0] = x[0] * (4.0 * x[0] * x[0] - 4.0) + 0.2;
    }
};

struct PotLehmer {
    const Matrix* a;
    int dim;
    void operator()(const double* x, double* g) const {
        const double* row = a->a.data();
        for (int i = 0; i < dim; ++i, row += dim) {
            double s = 0.0;
            for (int j = 0; j < dim; ++j) s += row[j] * x[j];
            g[i] = s;
        }
    }
};

struct PotIps {
    int dim;
    double sigma2;  // 2 * sigma
    void operator()(const double* x, double* g) const {
        double sum = 0.0;
        for (int i = 0; i < dim; ++i) sum += x[i];
        for (int i = 0; i < dim; ++i)
            g[i] = x[i] * (4.0 * x[i] * x[i] - 4.0) + 0.2 + sigma2 * (dim * x[i] - sum);
    }
};

struct PotRosen {
    int dim;
    double a, b;
    void operator()(const double* x, double* g) const {
        for (int i = 0; i < dim; ++i) g[i] = 0.0;
        for (int i = 0; i + 1 < dim; ++i) {
            const double t1 = x[i + 1] - x[i] * x[i];
            g[i] += -4.0 * b * x[i] * t1 - 2.0 * (a - x[i]);
            g[i + 1] += 2.0 * b * t1;
        }
    }
};

struct PotAny {
    const PotentialSpec* spec;
    int dim;
    void operator()(const double* x, double* g) const {
        gradient_into(*spec, {x, static_cast<std::size_t>(dim)},
                      {g, static_cast<std::size_t>(dim)});
    }
};

// ---------------------------------------------------------------------------
// Basin labelers. Label 1 is the low-basin region containing the global
// minimum (B1); other basins get higher labels.
// ---------------------------------------------------------------------------

struct LabelConst {
    int operator()(const double*, long, int) { return 1; }
};

struct LabelDoubleWell {
    double saddle;
    int operator()(const double* z, long, int) { return z[0] < saddle ? 1 : 2; }
};

struct LabelIps {
    const PotentialSpec* spec;
    int operator()(const double* z, long, int dim) {
        return ips_in_low_basin_union(*spec, {z, static_cast<std::size_t>(dim)}) ? 1 : 2;
    }
};

// Descent-snapshot labeler for kinds without a cheap membership test. The
// label is refreshed every `stride` steps and held in between.
struct LabelSnapshot {
    const PotentialSpec* spec;
    const CriticalPointSet* minima;
    int stride;
    int cached = 0;
    long last_step = -1;

    int operator()(const double* z, long step, int dim) {
        if (cached != 0 && last_step >= 0 && step - last_step < stride) return cached;
        DescentConfig cfg;
        cfg.step = spec->kind == PotentialKind::Rosenbrock ? 1e-4 : 1e-3;
        cfg.grad_tol = 1e-6;
        BasinResult r = classify_basin(*spec, {z, static_cast<std::size_t>(dim)}, cfg, *minima);
        cached = r.label;
        last_step = step;
        return cached;
    }
};

// Shared context computed once per batch when basin tracking is on.
struct BasinContext {
    double dw_saddle = 0.0;
    CriticalPointSet minima;
};

BasinContext make_basin_context(const PotentialSpec& spec, bool basins) {
    BasinContext ctx;
    if (!basins) return ctx;
    switch (spec.kind) {
        case PotentialKind::DoubleWell1D: {
            const CriticalPointSet cps = find_critical_points_1d(spec);
            if (cps.saddles.empty())
                throw std::runtime_error("basin tracking: no saddle found for double well");
            ctx.dw_saddle = cps.saddles.front().position[0];
            break;
        }
        case PotentialKind::InteractingParticles:
        case PotentialKind::LehmerQuadratic: break;
        case PotentialKind::Rosenbrock: ctx.minima = known_minima(spec); break;
        case PotentialKind::AnnLoss:
            throw std::invalid_argument("basin instrumentation is unsupported for ann_loss");
    }
    return ctx;
}

// ---------------------------------------------------------------------------
// One-step kernels shared by the public step operations and the sampling
// loop.
// ---------------------------------------------------------------------------

// Reflection step: x gets xi, y gets xi - 2 (e . xi) e, e = (x - y)/|x - y|.
template <class Pot>
inline void kernel_reflection(const Pot& pot, int dim, double h, double s, double* x, double* y,
                              const double* xi, double* gx, double* gy) {
    pot(x, gx);
    pot(y, gy);
    double dxy2 = 0.0, proj = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double di = x[i] - y[i];
        dxy2 += di * di;
        proj += di * xi[i];
    }
    const double c = 2.0 * proj / dxy2;  // 2 (e . xi) / |x - y|
    for (int i = 0; i < dim; ++i) {
        const double di = x[i] - y[i];
        x[i] += -gx[i] * h + s * xi[i];
        y[i] += -gy[i] * h + s * (xi[i] - c * di);
    }
}

// Maximal-coupling step of N(m_x, s^2 I) and N(m_y, s^2 I) by accept /
// reflect. Returns true on coupling (y assigned bitwise from x).
template <class Pot>
inline bool kernel_maximal(const Pot& pot, int dim, double h, double s, double* x, double* y,
                           const double* xi, double* gx, double* gy, Rng& rng) {
    pot(x, gx);
    pot(y, gy);
    double dn2 = 0.0, cs = 0.0;  // |m_x - m_y|^2 and xi . (m_x - m_y), unscaled by s
    for (int i = 0; i < dim; ++i) {
        const double mx = x[i] - gx[i] * h;
        const double my = y[i] - gy[i] * h;
        const double di = mx - my;
        dn2 += di * di;
        cs += xi[i] * di;
        x[i] = mx + s * xi[i];
        y[i] = my;
    }
    bool accept;
    if (dn2 == 0.0) {
        accept = true;  // identical proposals couple with probability 1
    } else {
        // log of phi(xi + Delta)/phi(xi) with Delta = (m_x - m_y)/s
        const double log_ratio = -cs / s - 0.5 * dn2 / (s * s);
        accept = std::log(rng.uniform_pos()) < log_ratio;
    }
    if (accept) {
        std::memcpy(y, x, sizeof(double) * static_cast<std::size_t>(dim));
        return true;
    }
    const double c = 2.0 * cs / dn2;  // 2 (ehat . xi) / |m_x - m_y|
    for (int i = 0; i < dim; ++i) {
        const double di = (x[i] - s * xi[i]) - y[i];  // m_x - m_y, recovered
        y[i] += s * xi[i] - s * c * di;
    }
    return false;
}

inline bool diverged(const double* z, int dim, double radius2) {
    double n2 = 0.0;
    for (int i = 0; i < dim; ++i) n2 += z[i] * z[i];
    return !(n2 <= radius2);  // catches NaN as well
}

// ---------------------------------------------------------------------------
// Full sampling loop.
// ---------------------------------------------------------------------------

template <class Pot, class Labeler>
CouplingRecord simulate_one(const Pot& pot, Labeler lab_x, Labeler lab_y,
                            const SimParams& params, const InitCondition& init,
                            const InstrumentConfig& ins, long sample_index) {
    const int dim = init.dimension();
    const double h = params.step;
    const double s = params.epsilon * std::sqrt(h);
    const double d = params.threshold();
    const double radius2 = params.divergence_radius * params.divergence_radius;
    const long n_max = params.max_steps();

    CouplingRecord rec;
    rec.sample_index = sample_index;
    rec.basin_trace_enabled = ins.basins;

    Rng rng(params.seed, static_cast<std::uint64_t>(sample_index));
    Vec x, y;
    init.draw(rng, x, y);

    if (x == y) {
        rec.status = SampleStatus::Coupled;
        rec.tau_c = 0.0;
        rec.steps = 0;
        return rec;
    }

    Vec noise(dim), gx(dim), gy(dim);
    double* px = x.data();
    double* py = y.data();
    double* pn = noise.data();

    Scheme scheme = dist(x, y) <= d ? Scheme::Maximal : Scheme::Reflection;
    bool coupled = false;

    int lx0 = 0, ly0 = 0;  // labels of the starting positions
    if (ins.basins) {
        lx0 = lab_x(px, 0, dim);
        ly0 = lab_y(py, 0, dim);
    }

    for (long n = 1; n <= n_max; ++n) {
        rng.fill_normal(pn, dim);
        const Scheme used = scheme;
        if (scheme == Scheme::Reflection) {
            kernel_reflection(pot, dim, h, s, px, py, pn, gx.data(), gy.data());
        } else {
            coupled = kernel_maximal(pot, dim, h, s, px, py, pn, gx.data(), gy.data(), rng);
        }
        rec.steps = n;
        const double t = static_cast<double>(n) * h;

        if (diverged(px, dim, radius2) || diverged(py, dim, radius2)) {
            rec.status = SampleStatus::Diverged;
            return rec;
        }

        const double dist_after = coupled ? 0.0 : dist(x, y);
        if (ins.record_trace && static_cast<long>(rec.trace.size()) < ins.trace_cap)
            rec.trace.push_back({used, dist_after, coupled});

        if (ins.basins) {
            const int lx = lab_x(px, n, dim);
            const int ly = coupled ? lx : lab_y(py, n, dim);
            if (!observed(rec.kappa_x) && lx == 1) rec.kappa_x = t;
            if (!observed(rec.kappa_y) && ly == 1) rec.kappa_y = t;
            if (!observed(rec.xi1) && lx == 1 && ly == 1) rec.xi1 = t;
            if (!observed(rec.x_first_leave) && lx != lx0) rec.x_first_leave = t;
            if (!observed(rec.y_first_leave) && ly != ly0) rec.y_first_leave = t;
            // the same-basin clock starts strictly after h (step 2 onward)
            if (n >= 2) {
                if (!observed(rec.tau_eps1) && lx == ly) rec.tau_eps1 = t;
                if (ins.stop_on_separation && !coupled && lx != ly) {
                    rec.status = SampleStatus::Separated;
                    rec.tau_sep = t;
                    return rec;
                }
            }
            if (ins.stop_on_h1_event && !coupled &&
                (observed(rec.kappa_x) || observed(rec.y_first_leave))) {
                rec.status = SampleStatus::EventStop;
                return rec;
            }
        }

        if (coupled) {
            rec.status = SampleStatus::Coupled;
            rec.tau_c = t;
            break;
        }
        scheme = dist_after <= d ? Scheme::Maximal : Scheme::Reflection;
    }

    if (!coupled) {
        rec.status = SampleStatus::Censored;
        return rec;
    }

    // Optionally continue the (now merged) trajectory until xi_1 is seen.
    if (ins.basins && ins.track_xi1 && !observed(rec.xi1)) {
        for (long n = rec.steps + 1; n <= n_max; ++n) {
            rng.fill_normal(pn, dim);
            pot(px, gx.data());
            for (int i = 0; i < dim; ++i) px[i] += -gx[i] * h + s * pn[i];
            rec.steps = n;
            if (diverged(px, dim, radius2)) {
                rec.status = SampleStatus::Diverged;
                return rec;
            }
            const double t = static_cast<double>(n) * h;
            const int lx = lab_x(px, n, dim);
            if (!observed(rec.kappa_x) && lx == 1) rec.kappa_x = t;
            if (!observed(rec.kappa_y) && lx == 1) rec.kappa_y = t;
            if (lx == 1) {
                rec.xi1 = t;
                break;
            }
        }
    }
    return rec;
}

CouplingRecord dispatch_sample(const PotentialSpec& spec, const SimParams& params,
                               const InitCondition& init, const InstrumentConfig& ins,
                               const BasinContext& ctx, long sample_index) {
    if (init.dimension() != spec.dimension)
        throw std::invalid_argument("sample_coupling_time: init dimension mismatch");
    switch (spec.kind) {
        case PotentialKind::DoubleWell1D: {
            LabelDoubleWell lab{ctx.dw_saddle};
            return simulate_one(PotDoubleWell{}, lab, lab, params, init, ins, sample_index);
        }
        case PotentialKind::LehmerQuadratic: {
            PotLehmer pot{&spec.lehmer_a, spec.dimension};
            return simulate_one(pot, LabelConst{}, LabelConst{}, params, init, ins, sample_index);
        }
        case PotentialKind::InteractingParticles: {
            PotIps pot{spec.dimension, 2.0 * spec.interaction};
            LabelIps lab{&spec};
            return simulate_one(pot, lab, lab, params, init, ins, sample_index);
        }
        case PotentialKind::Rosenbrock: {
            PotRosen pot{spec.dimension, spec.rosen_a, spec.rosen_b};
            LabelSnapshot lab{&spec, &ctx.minima, ins.basin_check_stride};
            return simulate_one(pot, lab, lab, params, init, ins, sample_index);
        }
        case PotentialKind::AnnLoss: {
            PotAny pot{&spec, spec.dimension};
            return simulate_one(pot, LabelConst{}, LabelConst{}, params, init, ins, sample_index);
        }
    }
    throw std::logic_error("sample_coupling_time: unhandled kind");
}

}  // namespace

void SimParams::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("sim: epsilon must be > 0");
    if (!(step > 0.0)) throw std::invalid_argument("sim: step must be > 0");
    if (!(max_time >= step)) throw std::invalid_argument("sim: max_time must be >= step");
    if (!(divergence_radius > 0.0))
        throw std::invalid_argument("sim: divergence_radius must be > 0");
    if (!(threshold_factor > 0.0))
        throw std::invalid_argument("sim: threshold_factor must be > 0");
}

CoupledState CoupledState::start(Vec x0, Vec y0, const SimParams& params, Rng rng) {
    if (x0.size() != y0.size())
        throw std::invalid_argument("CoupledState: x0 and y0 sizes differ");
    CoupledState st;
    const std::size_t dim = x0.size();
    st.x = std::move(x0);
    st.y = std::move(y0);
    st.rng = rng;
    st.scheme = st.x == st.y            ? Scheme::Coupled
                : dist(st.x, st.y) <= params.threshold() ? Scheme::Maximal
                                                         : Scheme::Reflection;
    st.noise.resize(dim);
    st.grad_x.resize(dim);
    st.grad_y.resize(dim);
    return st;
}

InitCondition InitCondition::points(Vec x0, Vec y0) {
    if (x0.size() != y0.size()) throw std::invalid_argument("init: x0 and y0 sizes differ");
    InitCondition c;
    c.mode = Mode::Points;
    c.x0 = std::move(x0);
    c.y0 = std::move(y0);
    return c;
}

InitCondition InitCondition::uniform(Vec lo, Vec hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("init: lo and hi sizes differ");
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(lo[i] <= hi[i])) throw std::invalid_argument("init: lo must be <= hi");
    InitCondition c;
    c.mode = Mode::Uniform;
    c.lo = std::move(lo);
    c.hi = std::move(hi);
    return c;
}

InitCondition InitCondition::fixed_x_uniform_y(Vec x0, Vec lo, Vec hi) {
    if (x0.size() != lo.size() || lo.size() != hi.size())
        throw std::invalid_argument("init: size mismatch");
    InitCondition c;
    c.mode = Mode::FixedXUniformY;
    c.x0 = std::move(x0);
    c.lo = std::move(lo);
    c.hi = std::move(hi);
    return c;
}

int InitCondition::dimension() const {
    switch (mode) {
        case Mode::Points:
        case Mode::FixedXUniformY: return static_cast<int>(x0.size());
        case Mode::Uniform: return static_cast<int>(lo.size());
    }
    return 0;
}

void InitCondition::draw(Rng& rng, Vec& x, Vec& y) const {
    const int dim = dimension();
    x.resize(dim);
    y.resize(dim);
    switch (mode) {
        case Mode::Points:
            std::copy(x0.begin(), x0.end(), x.begin());
            std::copy(y0.begin(), y0.end(), y.begin());
            return;
        case Mode::Uniform:
            for (int i = 0; i < dim; ++i) x[i] = rng.uniform(lo[i], hi[i]);
            for (int i = 0; i < dim; ++i) y[i] = rng.uniform(lo[i], hi[i]);
            return;
        case Mode::FixedXUniformY:
            std::copy(x0.begin(), x0.end(), x.begin());
            for (int i = 0; i < dim; ++i) y[i] = rng.uniform(lo[i], hi[i]);
            return;
    }
}

Vec em_step(const PotentialSpec& spec, std::span<const double> z, double h, double epsilon,
            std::span<const double> noise) {
    if (noise.size() != z.size()) throw std::invalid_argument("em_step: noise size mismatch");
    Vec g(z.size());
    gradient_into(spec, z, g);
    const double s = epsilon * std::sqrt(h);
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - g[i] * h + s * noise[i];
    if (!all_finite(out)) throw std::runtime_error("em_step: divergence (non-finite output)");
    return out;
}

void reflection_step(const PotentialSpec& spec, CoupledState& state, const SimParams& params) {
    if (state.scheme != Scheme::Reflection)
        throw std::invalid_argument("reflection_step: state scheme is not Reflection");
    if (state.x == state.y) throw std::invalid_argument("reflection_step: x equals y");
    const int dim = static_cast<int>(state.x.size());
    const double s = params.epsilon * std::sqrt(params.step);
    state.rng.fill_normal(state.noise.data(), dim);
    kernel_reflection(PotAny{&spec, dim}, dim, params.step, s, state.x.data(), state.y.data(),
                      state.noise.data(), state.grad_x.data(), state.grad_y.data());
    ++state.steps;
    const double r2 = params.divergence_radius * params.divergence_radius;
    if (diverged(state.x.data(), dim, r2) || diverged(state.y.data(), dim, r2))
        throw std::runtime_error("reflection_step: divergence");
    state.scheme = dist(state.x, state.y) <= params.threshold() ? Scheme::Maximal
                                                                : Scheme::Reflection;
}

bool maximal_step(const PotentialSpec& spec, CoupledState& state, const SimParams& params) {
    if (state.scheme != Scheme::Maximal)
        throw std::invalid_argument("maximal_step: state scheme is not Maximal");
    if (state.x == state.y) throw std::invalid_argument("maximal_step: x equals y");
    const int dim = static_cast<int>(state.x.size());
    const double s = params.epsilon * std::sqrt(params.step);
    state.rng.fill_normal(state.noise.data(), dim);
    const bool coupled =
        kernel_maximal(PotAny{&spec, dim}, dim, params.step, s, state.x.data(), state.y.data(),
                       state.noise.data(), state.grad_x.data(), state.grad_y.data(), state.rng);
    ++state.steps;
    const double r2 = params.divergence_radius * params.divergence_radius;
    if (diverged(state.x.data(), dim, r2) || diverged(state.y.data(), dim, r2))
        throw std::runtime_error("maximal_step: divergence");
    state.scheme = coupled                                       ? Scheme::Coupled
                   : dist(state.x, state.y) <= params.threshold() ? Scheme::Maximal
                                                                  : Scheme::Reflection;
    return coupled;
}

CouplingRecord sample_coupling_time(const PotentialSpec& spec, const SimParams& params,
                                    const InitCondition& init, const InstrumentConfig& instrument,
                                    long sample_index) {
    params.validate();
    const BasinContext ctx = make_basin_context(spec, instrument.basins);
    return dispatch_sample(spec, params, init, instrument, ctx, sample_index);
}

FirstPassagePair sample_first_passage_pair(const PotentialSpec& spec, const SimParams& params,
                                           const InitCondition& init, double h1,
                                           long sample_index) {
    params.validate();
    const double h = params.step;
    const long n_sub = static_cast<long>(std::floor(h / h1 + 0.5));
    if (n_sub < 1 || std::abs(h - n_sub * h1) > 1e-12 * h)
        throw std::invalid_argument("sample_first_passage_pair: h1 must divide h");

    const int dim = init.dimension();
    if (dim != spec.dimension)
        throw std::invalid_argument("sample_first_passage_pair: init dimension mismatch");

    const double thr = params.threshold();  // 2 eps sqrt(h) at the default factor
    const double eps = params.epsilon;
    const double sq_h1 = std::sqrt(h1);
    const long mmax = params.max_steps();

    Rng rng(params.seed, static_cast<std::uint64_t>(sample_index));
    Vec xf, yf;
    init.draw(rng, xf, yf);
    Vec xc = xf, yc = yf;
    Vec xi(dim), agg(dim), gx(dim), gy(dim);
    PotAny pot{&spec, dim};

    FirstPassagePair out;
    if (dist(xf, yf) <= thr) {
        out.tau_coarse = 0.0;
        out.tau_fine = 0.0;
        return out;
    }

    long fine_done = -1, coarse_done = -1;
    for (long m = 1; m <= mmax; ++m) {
        std::fill(agg.begin(), agg.end(), 0.0);
        for (long j = 0; j < n_sub; ++j) {
            rng.fill_normal(xi.data(), dim);
            for (int i = 0; i < dim; ++i) agg[i] += sq_h1 * xi[i];
            // fine chain keeps evolving even after its passage so the
            // shared Brownian path stays consistent
            if (xf != yf) {
                kernel_reflection(pot, dim, h1, eps * sq_h1, xf.data(), yf.data(), xi.data(),
                                  gx.data(), gy.data());
                if (!all_finite(xf) || !all_finite(yf))
                    throw std::runtime_error("sample_first_passage_pair: divergence");
                if (fine_done < 0 && dist(xf, yf) <= thr) fine_done = (m - 1) * n_sub + j + 1;
            }
        }
        if (xc != yc) {
            // coarse EM update driven by the aggregated increment: the
            // "noise" here is agg / sqrt(h), a standard normal in law
            pot(xc.data(), gx.data());
            pot(yc.data(), gy.data());
            double dxy2 = 0.0, proj = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double di = xc[i] - yc[i];
                dxy2 += di * di;
                proj += di * agg[i];
            }
            const double c = 2.0 * proj / dxy2;
            for (int i = 0; i < dim; ++i) {
                const double di = xc[i] - yc[i];
                xc[i] += -gx[i] * h + eps * agg[i];
                yc[i] += -gy[i] * h + eps * (agg[i] - c * di);
            }
            if (!all_finite(xc) || !all_finite(yc))
                throw std::runtime_error("sample_first_passage_pair: divergence");
            if (coarse_done < 0 && dist(xc, yc) <= thr) coarse_done = m;
        }
        if (fine_done >= 0 && coarse_done >= 0) break;
    }

    if (fine_done >= 0)
        out.tau_fine = static_cast<double>(fine_done) * h1;
    else
        out.censored_fine = true;
    if (coarse_done >= 0)
        out.tau_coarse = static_cast<double>(coarse_done) * h;
    else
        out.censored_coarse = true;
    return out;
}

BatchResult run_batch(const PotentialSpec& spec, const SimParams& params,
                      const InitCondition& init, const InstrumentConfig& instrument,
                      long n_samples, int workers, std::atomic<bool>* cancel) {
    params.validate();
    if (n_samples < 0) throw std::invalid_argument("run_batch: n_samples must be >= 0");

    BatchResult out;
    if (n_samples == 0) return out;

    const BasinContext ctx = make_basin_context(spec, instrument.basins);

    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<long>(workers, n_samples));

    out.records.resize(static_cast<std::size_t>(n_samples));
    std::vector<char> done(static_cast<std::size_t>(n_samples), 0);
    std::atomic<long> next{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;

    auto worker_fn = [&]() {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            if (cancel && cancel->load(std::memory_order_relaxed)) return;
            const long i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_samples) return;
            try {
                out.records[static_cast<std::size_t>(i)] =
                    dispatch_sample(spec, params, init, instrument, ctx, i);
                done[static_cast<std::size_t>(i)] = 1;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                error_message = e.what();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    if (workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw std::runtime_error("run_batch: " + error_message);

    // drop slots never filled (cancellation) while preserving index order
    std::size_t kept = 0;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        if (!done[i]) continue;
        if (kept != i) out.records[kept] = std::move(out.records[i]);
        ++kept;
    }
    out.partial = kept != out.records.size();
    out.records.resize(kept);

    for (const auto& r : out.records) {
        switch (r.status) {
            case SampleStatus::Coupled: ++out.n_coupled; break;
            case SampleStatus::Censored: ++out.n_censored; break;
            case SampleStatus::Diverged: ++out.n_diverged; break;
            case SampleStatus::Separated: ++out.n_separated; break;
            case SampleStatus::EventStop: ++out.n_event_stop; break;
        }
    }
    return out;
}

}  // namespace wells
