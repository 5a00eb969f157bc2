#include "mswitch/lattice.hpp"

#include "mswitch/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace mswitch {

namespace {

struct AxisMove {
    double p_minus = 0.0;
    double p_zero = 1.0;
    double p_plus = 0.0;
    std::size_t stride = 1;
    StencilKind kind = StencilKind::Exact;
};

double clean(double p)
{
    return (p < 0.0 && p > -1e-15) ? 0.0 : p;
}

// Three-point move {-H, 0, +H}, H = h dx. Prefers moment matching (mean b dt,
// second moment a dt + (b dt)^2); falls back to upwinded drift.
std::optional<AxisMove> try_axis(double a, double b, double dt, double dx, std::size_t h)
{
    const double H = static_cast<double>(h) * dx;
    const double H2 = H * H;
    const double q = (a * dt + b * b * dt * dt) / H2;
    const double r = b * dt / H;
    if (q <= 1.0) {
        const double pm = clean(0.5 * (q - r));
        const double pp = clean(0.5 * (q + r));
        if (pm >= 0.0 && pp >= 0.0) {
            return AxisMove{pm, 1.0 - q, pp, h, StencilKind::Exact};
        }
    }
    const double s = (a * dt + H * std::abs(b) * dt) / H2;
    if (s <= 1.0) {
        const double pp = (0.5 * a + H * std::max(b, 0.0)) * dt / H2;
        const double pm = (0.5 * a + H * std::max(-b, 0.0)) * dt / H2;
        return AxisMove{pm, 1.0 - s, pp, h, StencilKind::Upwind};
    }
    return std::nullopt;
}

AxisMove choose_axis_move(double a, double b, double dt, const Axis& axis, bool wide, std::size_t n,
                          std::size_t node)
{
    const double dx = axis.spacing();
    const std::size_t h_max = wide ? axis.nodes - 1 : 1;
    for (std::size_t h = 1; h <= h_max; ++h) {
        if (auto mv = try_axis(a, b, dt, dx, h)) {
            return *mv;
        }
    }
    const double suggested = dx * dx / (a + dx * std::abs(b));
    std::ostringstream os;
    os << "negative transition probability at time index " << n << ", node " << node << " (variance " << a
       << ", drift " << b << ", dt " << dt << ", dx " << dx << ")";
    if (wide) {
        os << ": no stencil stride fits inside the grid";
    }
    os << "; suggested dt <= " << suggested;
    throw ChainBuildError(os.str(), n, node, suggested);
}

using RawStencil = std::vector<std::pair<std::vector<int>, double>>;

// Product of the two axis moves plus a corner correction carrying the cross
// covariance. Empty when a corner would go negative.
RawStencil product_stencil(const std::vector<AxisMove>& moves, double a12, double dt, const GridSpec& grid)
{
    const double c = a12 * dt / (4.0 * static_cast<double>(moves[0].stride) * grid.axes[0].spacing() *
                                 static_cast<double>(moves[1].stride) * grid.axes[1].spacing());
    const double p1[3] = {moves[0].p_minus, moves[0].p_zero, moves[0].p_plus};
    const double p2[3] = {moves[1].p_minus, moves[1].p_zero, moves[1].p_plus};
    RawStencil raw;
    for (int s2 = -1; s2 <= 1; ++s2) {
        for (int s1 = -1; s1 <= 1; ++s1) {
            double prob = p1[s1 + 1] * p2[s2 + 1];
            if (s1 != 0 && s2 != 0) {
                prob += (s1 == s2) ? c : -c;
            }
            prob = clean(prob);
            if (prob < 0.0) {
                return {};
            }
            raw.push_back({{s1, s2}, prob});
        }
    }
    return raw;
}

// Seven points at `stride` spacings: centre, the four axis neighbours and the
// two neighbours on the diagonal that carries the sign of the cross moment. Matches mean b dt
// and covariance a dt exactly; needs a roughly diagonally dominant a in grid
// units and a small enough dt. Empty when some weight is negative.
RawStencil diagonal_stencil(const std::vector<double>& a, const std::vector<double>& b, double dt,
                            const GridSpec& grid, std::size_t stride)
{
    const double h1 = static_cast<double>(stride) * grid.axes[0].spacing();
    const double h2 = static_cast<double>(stride) * grid.axes[1].spacing();
    // second moments per unit time
    const double m11 = a[0] + b[0] * b[0] * dt;
    const double m22 = a[3] + b[1] * b[1] * dt;
    const double m12 = a[1] + b[0] * b[1] * dt;
    const int s = m12 >= 0.0 ? 1 : -1;
    const double q = std::abs(m12) * dt / (2.0 * h1 * h2);
    const double base1 = m11 * dt / (2.0 * h1 * h1) - q;
    const double base2 = m22 * dt / (2.0 * h2 * h2) - q;
    const double d1 = b[0] * dt / (2.0 * h1);
    const double d2 = b[1] * dt / (2.0 * h2);
    RawStencil raw = {
        {{-1, 0}, clean(base1 - d1)}, {{1, 0}, clean(base1 + d1)}, {{0, -1}, clean(base2 - d2)},
        {{0, 1}, clean(base2 + d2)},  {{1, s}, q},                 {{-1, -s}, q},
    };
    double rest = 1.0;
    for (const auto& [off, prob] : raw) {
        if (prob < 0.0) {
            return {};
        }
        rest -= prob;
    }
    rest = clean(rest);
    if (rest < 0.0) {
        return {};
    }
    raw.push_back({{0, 0}, rest});
    return raw;
}

}  // namespace

std::span<const Transition> MarkovChainApprox::stencil(std::size_t n, std::size_t node) const
{
    const std::size_t k = slice_of(n) * nodes_ + node;
    return {entries_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
}

StencilKind MarkovChainApprox::kind(std::size_t n, std::size_t node) const
{
    return kinds_[slice_of(n) * nodes_ + node];
}

std::size_t MarkovChainApprox::count(StencilKind k) const
{
    return static_cast<std::size_t>(std::count(kinds_.begin(), kinds_.end(), k));
}

void MarkovChainApprox::expectation(std::size_t n, std::span<const double> next, std::span<double> out) const
{
    const std::size_t base = slice_of(n) * nodes_;
    for (std::size_t node = 0; node < nodes_; ++node) {
        double acc = 0.0;
        for (std::size_t e = offsets_[base + node]; e < offsets_[base + node + 1]; ++e) {
            acc += entries_[e].prob * next[entries_[e].target];
        }
        out[node] = acc;
    }
}

MarkovChainApprox build_chain(const SwitchingProblem& p, const GridSpec& grid, const ChainOptions& opts)
{
    p.check_shape();
    grid.check();
    if (grid.dim() != p.state_dim) {
        throw std::invalid_argument("build_chain: grid dimension does not match state_dim");
    }
    for (std::size_t d = 0; d < grid.dim(); ++d) {
        if (!(p.x0[d] > grid.axes[d].lo && p.x0[d] < grid.axes[d].hi)) {
            throw std::invalid_argument("build_chain: x0 must lie strictly inside the grid");
        }
    }

    bool uses_time = false;
    for (const auto& e : p.drift) {
        uses_time = uses_time || e.uses_time();
    }
    for (const auto& row : p.vol) {
        for (const auto& e : row) {
            uses_time = uses_time || e.uses_time();
        }
    }

    MarkovChainApprox chain;
    chain.grid_ = grid;
    chain.nodes_ = grid.node_count();
    chain.slices_ = uses_time ? grid.steps : 1;
    chain.offsets_.reserve(chain.slices_ * chain.nodes_ + 1);
    chain.offsets_.push_back(0);

    const double dt = grid.dt();
    const std::size_t dim = grid.dim();

    for (std::size_t n = 0; n < chain.slices_; ++n) {
        const double t = grid.time(n);
        for (std::size_t node = 0; node < chain.nodes_; ++node) {
            const auto x = grid.coords(node);
            const auto idx = grid.unflatten(node);
            const auto b = p.drift_at(t, x);
            const auto a = p.covariance(t, x);

            std::vector<AxisMove> moves(dim);
            StencilKind kind = StencilKind::Exact;
            for (std::size_t d = 0; d < dim; ++d) {
                moves[d] = choose_axis_move(a[d * dim + d], b[d], dt, grid.axes[d], opts.allow_wide_stencil, n, node);
                if (moves[d].kind == StencilKind::Upwind) {
                    kind = StencilKind::Upwind;
                }
            }

            // (offset per axis in {-1,0,1}, probability) before clamping to the grid.
            RawStencil raw;
            if (dim == 1) {
                raw = {{{-1}, moves[0].p_minus}, {{0}, moves[0].p_zero}, {{1}, moves[0].p_plus}};
            } else {
                raw = product_stencil(moves, a[1], dt, grid);
                const std::size_t widest =
                    opts.allow_wide_stencil ? std::min(grid.axes[0].nodes, grid.axes[1].nodes) - 1 : 1;
                for (std::size_t h = 1; raw.empty() && h <= widest; ++h) {
                    raw = diagonal_stencil(a, b, dt, grid, h);
                    if (!raw.empty()) {
                        moves[0].stride = moves[1].stride = h;
                        kind = StencilKind::Exact;
                    }
                }
                if (raw.empty()) {
                    std::ostringstream os;
                    os << "negative transition probability at time index " << n << ", node " << node
                       << ": cross covariance " << a[1]
                       << " is too large for the grid; align the grid with the diffusion or make "
                          "sigma sigma^T diagonally dominant in grid units";
                    throw ChainBuildError(os.str(), n, node, 0.0);
                }
            }

            for (const auto& mv : moves) {
                chain.max_stride_ = std::max(chain.max_stride_, mv.stride);
            }

            std::map<std::size_t, double> merged;
            for (const auto& [offs, prob] : raw) {
                if (prob == 0.0) {
                    continue;
                }
                std::vector<std::size_t> tgt(dim);
                for (std::size_t d = 0; d < dim; ++d) {
                    const long long j = static_cast<long long>(idx[d]) +
                                        offs[d] * static_cast<long long>(moves[d].stride);
                    const long long last = static_cast<long long>(grid.axes[d].nodes) - 1;
                    if (j < 0 || j > last) {
                        kind = StencilKind::Folded;
                    }
                    tgt[d] = static_cast<std::size_t>(std::clamp(j, 0LL, last));
                }
                merged[grid.flatten(tgt)] += prob;
            }

            // Audit.
            double total = 0.0;
            std::vector<double> mean(dim, 0.0);
            std::vector<double> second(dim * dim, 0.0);
            for (const auto& [target, prob] : merged) {
                if (!(prob >= 0.0 && prob <= 1.0 + 1e-12)) {
                    throw std::logic_error("build_chain: probability out of range at node " + std::to_string(node));
                }
                total += prob;
                const auto y = grid.coords(target);
                for (std::size_t r = 0; r < dim; ++r) {
                    mean[r] += prob * (y[r] - x[r]);
                    for (std::size_t c = 0; c < dim; ++c) {
                        second[r * dim + c] += prob * (y[r] - x[r]) * (y[c] - x[c]);
                    }
                }
                chain.entries_.push_back({target, prob});
            }
            if (std::abs(total - 1.0) > 1e-12) {
                throw std::logic_error("build_chain: stencil at node " + std::to_string(node) + " sums to " +
                                       format_double(total));
            }
            if (kind != StencilKind::Folded) {
                for (std::size_t r = 0; r < dim; ++r) {
                    double scale = 1.0 + std::abs(b[r]);
                    for (std::size_t c = 0; c < dim; ++c) {
                        scale = std::max(scale, std::abs(a[r * dim + c]));
                    }
                    const double tol = opts.consistency_tol * dt * scale;
                    if (std::abs(mean[r] - b[r] * dt) > tol) {
                        throw std::logic_error("build_chain: drift mismatch at node " + std::to_string(node));
                    }
                    for (std::size_t c = 0; c < dim; ++c) {
                        const double cov = second[r * dim + c] - mean[r] * mean[c];
                        const double err = cov - a[r * dim + c] * dt;
                        const bool ok = kind == StencilKind::Exact ? std::abs(err) <= tol : err >= -tol;
                        if (!ok) {
                            throw std::logic_error("build_chain: covariance mismatch at node " + std::to_string(node));
                        }
                    }
                }
            }
            chain.kinds_.push_back(kind);
            chain.offsets_.push_back(chain.entries_.size());
        }
    }
    return chain;
}

std::size_t ConvergenceTrace::max_slice_sweeps() const
{
    return slice_sweeps.empty() ? 0 : *std::max_element(slice_sweeps.begin(), slice_sweeps.end());
}

std::string ConvergenceTrace::to_text() const
{
    std::ostringstream os;
    os << "# converged = " << (converged ? "true" : "false") << '\n';
    os << "# tolerance = " << format_double(tolerance) << '\n';
    os << "# max_slice_sweeps = " << max_slice_sweeps() << '\n';
    os << "level,sup_increment,min_increment,sweeps,seconds\n";
    for (const auto& r : levels) {
        os << r.level << ',' << format_double(r.sup_increment) << ',' << format_double(r.min_increment) << ','
           << r.sweeps << ',' << format_double(r.seconds) << '\n';
    }
    return os.str();
}

namespace {

void check_compatible(const MarkovChainApprox& chain, const SwitchingProblem& p, const TabulatedProblem& tab)
{
    if (!(chain.grid() == tab.grid()) || tab.mode_count() != p.mode_count) {
        throw std::invalid_argument("lattice solver: chain, problem and tabulation disagree on grid or modes");
    }
}

// Continuation values psi dt + E[next] for one mode at time index n.
void continuation(const MarkovChainApprox& chain, const TabulatedProblem& tab, std::size_t mode, std::size_t n,
                  std::span<const double> next, std::span<double> out)
{
    chain.expectation(n, next, out);
    const double dt = chain.grid().dt();
    for (std::size_t node = 0; node < out.size(); ++node) {
        out[node] += tab.profit(mode, n, node) * dt;
    }
}

// One n-switch level: obstacle from `prev`, continuation from the level itself.
void level_sweep(const MarkovChainApprox& chain, const TabulatedProblem& tab, const ValueField& prev,
                 ValueField& cur)
{
    const std::size_t m = tab.mode_count();
    const GridSpec& g = chain.grid();
    for (std::size_t n = g.steps; n-- > 0;) {
        for (std::size_t i = 0; i < m; ++i) {
            auto out = cur.slice(i, n);
            continuation(chain, tab, i, n, cur.slice(i, n + 1), out);
            for (std::size_t node = 0; node < out.size(); ++node) {
                double best = out[node];
                for (std::size_t j = 0; j < m; ++j) {
                    if (j == i) {
                        continue;
                    }
                    const double cand = -tab.cost(i, j, n, node) + prev.at(j, n, node);
                    if (cand > best) {
                        best = cand;
                    }
                }
                out[node] = best;
            }
        }
    }
}

std::pair<double, double> increments(const ValueField& prev, const ValueField& cur)
{
    double sup = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    const auto a = prev.values();
    const auto b = cur.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = b[k] - a[k];
        sup = std::max(sup, std::abs(d));
        lo = std::min(lo, d);
    }
    return {sup, lo};
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ValueField solve_zero_switch(const MarkovChainApprox& chain, const SwitchingProblem& p, const TabulatedProblem& tab)
{
    check_compatible(chain, p, tab);
    ValueField v(chain.grid(), p.mode_count, p.hash(), "zero-switch");
    for (std::size_t n = chain.grid().steps; n-- > 0;) {
        for (std::size_t i = 0; i < p.mode_count; ++i) {
            continuation(chain, tab, i, n, v.slice(i, n + 1), v.slice(i, n));
        }
    }
    return v;
}

NSwitchResult solve_n_switch(const MarkovChainApprox& chain, const SwitchingProblem& p, const TabulatedProblem& tab,
                             std::size_t n_max)
{
    if (n_max < 1) {
        throw std::invalid_argument("solve_n_switch: n_max must be at least 1");
    }
    NSwitchResult res;
    auto start = std::chrono::steady_clock::now();
    res.levels.push_back(solve_zero_switch(chain, p, tab));
    res.levels.back().set_scheme("n-switch:0");
    res.trace.levels.push_back({0, 0.0, 0.0, 0, seconds_since(start)});
    for (std::size_t l = 1; l <= n_max; ++l) {
        start = std::chrono::steady_clock::now();
        ValueField cur(chain.grid(), p.mode_count, p.hash(), "n-switch:" + std::to_string(l));
        level_sweep(chain, tab, res.levels.back(), cur);
        const auto [sup, lo] = increments(res.levels.back(), cur);
        res.trace.levels.push_back({l, sup, lo, 1, seconds_since(start)});
        res.levels.push_back(std::move(cur));
    }
    return res;
}

FixedPointResult solve_fixed_point_by_levels(const MarkovChainApprox& chain, const SwitchingProblem& p,
                                             const TabulatedProblem& tab, const FixedPointOptions& opts)
{
    if (!(opts.tol > 0.0)) {
        throw std::invalid_argument("solve_fixed_point: tol must be positive");
    }
    const double scaled_tol = opts.tol * (1.0 + tab.profit_sup() * p.horizon);
    ConvergenceTrace trace;
    trace.tolerance = scaled_tol;
    auto start = std::chrono::steady_clock::now();
    ValueField prev = solve_zero_switch(chain, p, tab);
    trace.levels.push_back({0, 0.0, 0.0, 0, seconds_since(start)});
    for (std::size_t l = 1; l <= opts.max_outer; ++l) {
        start = std::chrono::steady_clock::now();
        ValueField cur(chain.grid(), p.mode_count, p.hash(), "n-switch:" + std::to_string(l));
        level_sweep(chain, tab, prev, cur);
        const auto [sup, lo] = increments(prev, cur);
        trace.levels.push_back({l, sup, lo, 1, seconds_since(start)});
        prev = std::move(cur);
        if (sup < scaled_tol) {
            trace.converged = true;
            prev.set_scheme("fixed-point");
            return {std::move(prev), std::move(trace), std::nullopt};
        }
    }
    const std::string what = "n-switch iteration did not converge within " + std::to_string(opts.max_outer) +
                             " levels (last increment " + format_double(trace.levels.back().sup_increment) + ")";
    throw NonConvergenceError(what, std::move(trace));
}

FixedPointResult solve_fixed_point(const MarkovChainApprox& chain, const SwitchingProblem& p,
                                   const TabulatedProblem& tab, const FixedPointOptions& opts)
{
    check_compatible(chain, p, tab);
    if (!(opts.tol > 0.0)) {
        throw std::invalid_argument("solve_fixed_point: tol must be positive");
    }
    const std::size_t m = p.mode_count;
    const GridSpec& g = chain.grid();
    const auto start = std::chrono::steady_clock::now();

    ValueField v(g, m, p.hash(), "fixed-point");
    ConvergenceTrace trace;
    trace.tolerance = opts.tol * (1.0 + tab.profit_sup() * p.horizon);
    trace.slice_sweeps.assign(g.steps + 1, 0);
    std::optional<std::size_t> loop_at;

    for (std::size_t n = g.steps; n-- > 0;) {
        for (std::size_t i = 0; i < m; ++i) {
            continuation(chain, tab, i, n, v.slice(i, n + 1), v.slice(i, n));
        }
        // An improving sweep extends the best instantaneous switching chain by
        // at least one mode; without free loops m-1 of them suffice.
        std::size_t improving = 0;
        for (std::size_t sweep = 1; sweep <= m && m > 1; ++sweep) {
            bool changed = false;
            for (std::size_t i = 0; i < m; ++i) {
                auto vi = v.slice(i, n);
                for (std::size_t node = 0; node < vi.size(); ++node) {
                    double best = vi[node];
                    for (std::size_t j = 0; j < m; ++j) {
                        if (j == i) {
                            continue;
                        }
                        const double cand = -tab.cost(i, j, n, node) + v.at(j, n, node);
                        if (cand > best) {
                            best = cand;
                        }
                    }
                    if (best > vi[node]) {
                        vi[node] = best;
                        changed = true;
                    }
                }
            }
            if (!changed) {
                break;
            }
            ++improving;
        }
        trace.slice_sweeps[n] = improving;
        if (improving > m - 1 && !loop_at) {
            loop_at = n;
        }
    }
    trace.converged = !loop_at;
    trace.levels.push_back({0, 0.0, 0.0, trace.max_slice_sweeps(), seconds_since(start)});

    if (loop_at) {
        throw SwitchingLoopError("instantaneous switching loop at time index " + std::to_string(*loop_at) +
                                     ": more than " + std::to_string(m - 1) +
                                     " improving same-slice sweeps; the cost matrix admits a non-positive cycle",
                                 std::move(v), std::move(trace), *loop_at);
    }

    FixedPointResult res{std::move(v), std::move(trace), std::nullopt};
    if (opts.verify_with_levels) {
        const auto by_levels = solve_fixed_point_by_levels(chain, p, tab, opts);
        res.level_discrepancy = ValueField::sup_distance(res.field, by_levels.field);
        res.trace.levels = by_levels.trace.levels;
    }
    return res;
}

std::vector<double> value_upper_bound(const MarkovChainApprox& chain, const SwitchingProblem& p,
                                      const TabulatedProblem& tab)
{
    check_compatible(chain, p, tab);
    const GridSpec& g = chain.grid();
    const std::size_t nodes = g.node_count();
    const std::size_t m = p.mode_count;
    std::vector<double> next(nodes, 0.0);
    std::vector<double> cur(nodes, 0.0);
    double neg_sup = 0.0;
    for (std::size_t n = g.steps + 1; n-- > 0;) {
        for (std::size_t node = 0; node < nodes; ++node) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    const double c = tab.cost(i, j, n, node);
                    if (c < 0.0) {
                        neg_sup = std::max(neg_sup, -c);
                    }
                }
            }
        }
        if (n == g.steps) {
            continue;
        }
        chain.expectation(n, next, cur);
        for (std::size_t node = 0; node < nodes; ++node) {
            double psi = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                psi = std::max(psi, std::abs(tab.profit(i, n, node)));
            }
            cur[node] += psi * g.dt();
        }
        std::swap(cur, next);
    }
    for (double& u : next) {
        u += static_cast<double>(p.neg_cost_bound) * neg_sup;
    }
    return next;
}

}  // namespace mswitch
