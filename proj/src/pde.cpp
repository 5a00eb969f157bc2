#include "mswitch/pde.hpp"

#include "mswitch/text.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace mswitch {

std::span<const GeneratorEntry> DiscreteGenerator::off_diagonal(std::size_t n, std::size_t node) const
{
    const std::size_t k = slice_of(n) * nodes_ + node;
    return {entries_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
}

double DiscreteGenerator::diagonal(std::size_t n, std::size_t node) const
{
    return diag_[slice_of(n) * nodes_ + node];
}

double DiscreteGenerator::apply(std::size_t n, std::size_t node, std::span<const double> v) const
{
    double acc = diagonal(n, node) * v[node];
    for (const auto& e : off_diagonal(n, node)) {
        acc += e.coeff * v[e.column];
    }
    return acc;
}

DiscreteGenerator assemble(const SwitchingProblem& p, const GridSpec& grid)
{
    p.check_shape();
    grid.check();
    if (grid.dim() != p.state_dim) {
        throw std::invalid_argument("assemble: grid dimension does not match state_dim");
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

    DiscreteGenerator gen;
    gen.grid_ = grid;
    gen.nodes_ = grid.node_count();
    gen.slices_ = uses_time ? grid.steps : 1;
    gen.offsets_.push_back(0);
    gen.min_off_ = std::numeric_limits<double>::infinity();
    gen.max_central_dx_ = std::numeric_limits<double>::infinity();
    gen.max_diag_ = -std::numeric_limits<double>::infinity();

    const std::size_t dim = grid.dim();
    for (std::size_t n = 0; n < gen.slices_; ++n) {
        const double t = grid.time(n);
        for (std::size_t node = 0; node < gen.nodes_; ++node) {
            const auto x = grid.coords(node);
            const auto idx = grid.unflatten(node);
            const auto b = p.drift_at(t, x);
            const auto a = p.covariance(t, x);
            const bool boundary = grid.on_boundary(node);

            std::map<std::size_t, double> row;
            auto neighbour = [&](std::span<const int> off) {
                std::vector<std::size_t> j(dim);
                for (std::size_t d = 0; d < dim; ++d) {
                    j[d] = static_cast<std::size_t>(static_cast<long long>(idx[d]) + off[d]);
                }
                return grid.flatten(j);
            };
            auto at_edge = [&](std::size_t d, int dir) {
                return dir < 0 ? idx[d] == 0 : idx[d] + 1 == grid.axes[d].nodes;
            };

            if (!boundary) {
                double cross = 0.0;
                if (dim == 2) {
                    cross = a[1] / (2.0 * grid.axes[0].spacing() * grid.axes[1].spacing());
                }
                for (std::size_t d = 0; d < dim; ++d) {
                    const double h = grid.axes[d].spacing();
                    const double axis_coeff = 0.5 * a[d * dim + d] / (h * h) - std::abs(cross);
                    // Central drift keeps both neighbour weights non-negative
                    // only while diffusion dominates; upwind otherwise.
                    const double half_drift = 0.5 * b[d] / h;
                    const bool central = axis_coeff >= std::abs(half_drift);
                    if (b[d] != 0.0) {
                        gen.max_central_dx_ = std::min(gen.max_central_dx_, a[d * dim + d] / std::abs(b[d]));
                        ++(central ? gen.central_rows_ : gen.upwind_rows_);
                    }
                    for (int dir : {-1, 1}) {
                        std::vector<int> off(dim, 0);
                        off[d] = dir;
                        double coeff = axis_coeff;
                        if (central) {
                            coeff += dir * half_drift;
                        } else if ((b[d] > 0.0) == (dir > 0) && b[d] != 0.0) {
                            coeff += std::abs(b[d]) / h;
                        }
                        row[neighbour(off)] += coeff;
                    }
                }
                if (dim == 2 && cross != 0.0) {
                    const int s = cross > 0.0 ? 1 : -1;
                    const int c1[2] = {1, s};
                    const int c2[2] = {-1, -s};
                    row[neighbour(c1)] += std::abs(cross);
                    row[neighbour(c2)] += std::abs(cross);
                }
            } else {
                for (std::size_t d = 0; d < dim; ++d) {
                    const double h = grid.axes[d].spacing();
                    const int dir = b[d] > 0.0 ? 1 : -1;
                    if (b[d] == 0.0 || at_edge(d, dir)) {
                        continue;  // outward drift on the boundary is dropped
                    }
                    std::vector<int> off(dim, 0);
                    off[d] = dir;
                    row[neighbour(off)] += std::abs(b[d]) / h;
                }
            }

            double diag = 0.0;
            for (const auto& [col, coeff] : row) {
                if (coeff < 0.0) {
                    std::ostringstream os;
                    os << "assemble: negative off-diagonal " << coeff << " at node " << node << " (time index " << n
                       << "); the cross-diffusion " << a[1]
                       << " breaks monotonicity on this grid - rescale the axes so that sigma sigma^T is "
                          "diagonally dominant in grid units";
                    throw MonotonicityError(os.str());
                }
                gen.min_off_ = std::min(gen.min_off_, coeff);
                diag -= coeff;
                if (coeff != 0.0) {
                    gen.entries_.push_back({col, coeff});
                }
            }
            gen.max_diag_ = std::max(gen.max_diag_, diag);
            gen.diag_.push_back(diag);
            gen.offsets_.push_back(gen.entries_.size());
        }
    }
    if (gen.entries_.empty()) {
        gen.min_off_ = 0.0;
    }
    return gen;
}

std::string PdeResult::howard_log() const
{
    std::ostringstream os;
    os << "time_index,howard_iterations\n";
    for (std::size_t n = 0; n < howard_iterations.size(); ++n) {
        os << n << ',' << howard_iterations[n] << '\n';
    }
    return os.str();
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr int kContinue = -1;

}  // namespace

PdeResult solve_system(const SwitchingProblem& p, const DiscreteGenerator& gen, const TabulatedProblem& tab,
                       const PdeOptions& opts)
{
    const GridSpec& g = gen.grid();
    if (!(g == tab.grid()) || tab.mode_count() != p.mode_count) {
        throw std::invalid_argument("solve_system: generator, problem and tabulation disagree");
    }
    const std::size_t m = p.mode_count;
    const std::size_t nodes = g.node_count();
    const std::size_t unknowns = m * nodes;
    const double dt = g.dt();
    const std::size_t max_iter = opts.max_howard_iterations ? opts.max_howard_iterations : unknowns;

    PdeResult res{ValueField(g, m, p.hash(), "pde"), std::vector<std::size_t>(g.steps + 1, 0)};
    ValueField& v = res.field;

    // decision[i * nodes + node]: kContinue or the 0-based target mode.
    std::vector<int> decision(unknowns, kContinue);
    std::vector<double> rhs_cont(unknowns);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(unknowns));
    Eigen::VectorXd sol(static_cast<Eigen::Index>(unknowns));
    std::vector<Triplet> triplets;
    Eigen::SparseLU<SparseMatrix> lu;

    // Source integrated as dt (I + dt A / 2) psi through the resolvent, which
    // is second order in dt where the plain dt psi would be first order.
    std::vector<std::vector<double>> psi_slice(m, std::vector<double>(nodes));
    for (std::size_t n = g.steps; n-- > 0;) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t node = 0; node < nodes; ++node) {
                psi_slice[i][node] = tab.profit(i, n, node);
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t node = 0; node < nodes; ++node) {
                rhs_cont[i * nodes + node] = v.at(i, n + 1, node) + dt * tab.profit(i, n, node) -
                                             0.5 * dt * dt * gen.apply(n, node, psi_slice[i]);
            }
        }

        std::size_t iter = 0;
        for (;;) {
            if (++iter > max_iter) {
                throw PdeSolverError("policy iteration did not settle within " + std::to_string(max_iter) +
                                         " iterations at time index " + std::to_string(n),
                                     n);
            }
            triplets.clear();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t node = 0; node < nodes; ++node) {
                    const std::size_t r = i * nodes + node;
                    const auto row = static_cast<Eigen::Index>(r);
                    if (decision[r] == kContinue) {
                        triplets.emplace_back(row, row, 1.0 - dt * gen.diagonal(n, node));
                        for (const auto& e : gen.off_diagonal(n, node)) {
                            triplets.emplace_back(row, static_cast<Eigen::Index>(i * nodes + e.column),
                                                  -dt * e.coeff);
                        }
                        rhs[row] = rhs_cont[r];
                    } else {
                        const auto j = static_cast<std::size_t>(decision[r]);
                        triplets.emplace_back(row, row, 1.0);
                        triplets.emplace_back(row, static_cast<Eigen::Index>(j * nodes + node), -1.0);
                        rhs[row] = -tab.cost(i, j, n, node);
                    }
                }
            }
            SparseMatrix mat(static_cast<Eigen::Index>(unknowns), static_cast<Eigen::Index>(unknowns));
            mat.setFromTriplets(triplets.begin(), triplets.end());
            lu.compute(mat);
            if (lu.info() != Eigen::Success) {
                throw PdeSolverError("sparse factorisation failed at time index " + std::to_string(n) + ": " +
                                         lu.lastErrorMessage(),
                                     n);
            }
            sol = lu.solve(rhs);
            if (lu.info() != Eigen::Success || !sol.allFinite()) {
                throw PdeSolverError("linear solve failed at time index " + std::to_string(n), n);
            }

            // Greedy improvement: pick the row with the smallest residual.
            bool changed = false;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t node = 0; node < nodes; ++node) {
                    const std::size_t r = i * nodes + node;
                    const double vi = sol[static_cast<Eigen::Index>(r)];
                    double cont = (1.0 - dt * gen.diagonal(n, node)) * vi - rhs_cont[r];
                    for (const auto& e : gen.off_diagonal(n, node)) {
                        cont -= dt * e.coeff * sol[static_cast<Eigen::Index>(i * nodes + e.column)];
                    }
                    int best = kContinue;
                    double best_res = cont;
                    for (std::size_t j = 0; j < m; ++j) {
                        if (j == i) {
                            continue;
                        }
                        const double sw = vi - sol[static_cast<Eigen::Index>(j * nodes + node)] + tab.cost(i, j, n, node);
                        if (sw < best_res - opts.tie_tol) {
                            best = static_cast<int>(j);
                            best_res = sw;
                        }
                    }
                    if (best != decision[r]) {
                        // Keep the current choice when it is within the tie tolerance.
                        double cur_res = cont;
                        if (decision[r] != kContinue) {
                            const auto cj = static_cast<std::size_t>(decision[r]);
                            cur_res = vi - sol[static_cast<Eigen::Index>(cj * nodes + node)] + tab.cost(i, cj, n, node);
                        }
                        if (best_res < cur_res - opts.tie_tol) {
                            decision[r] = best;
                            changed = true;
                        }
                    }
                }
            }
            if (!changed) {
                break;
            }
        }
        res.howard_iterations[n] = iter;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t node = 0; node < nodes; ++node) {
                v.at(i, n, node) = sol[static_cast<Eigen::Index>(i * nodes + node)];
            }
        }
    }
    return res;
}

double complementarity_residual(const DiscreteGenerator& gen, const TabulatedProblem& tab, const ValueField& v)
{
    const GridSpec& g = v.grid();
    const std::size_t m = v.mode_count();
    const double dt = g.dt();
    std::vector<double> psi(v.node_count());
    double worst = 0.0;
    for (std::size_t n = 0; n < g.steps; ++n) {
        for (std::size_t i = 0; i < m; ++i) {
            const auto vi = v.slice(i, n);
            for (std::size_t node = 0; node < v.node_count(); ++node) {
                psi[node] = tab.profit(i, n, node);
            }
            for (std::size_t node = 0; node < v.node_count(); ++node) {
                double obstacle = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < m; ++j) {
                    if (j != i) {
                        obstacle = std::max(obstacle, -tab.cost(i, j, n, node) + v.at(j, n, node));
                    }
                }
                const double gap = std::abs(vi[node] - obstacle);
                const double source = psi[node] - 0.5 * dt * gen.apply(n, node, psi);
                const double pde =
                    std::abs((vi[node] - v.at(i, n + 1, node)) / dt - gen.apply(n, node, vi) - source);
                worst = std::max(worst, m > 1 ? std::min(gap, pde) : pde);
            }
        }
    }
    return worst;
}

}  // namespace mswitch
