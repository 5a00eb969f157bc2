#include "mswitch/strategy.hpp"

#include "mswitch/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace mswitch {

SwitchingPolicy::SwitchingPolicy(GridSpec grid, std::size_t mode_count, double tol, std::string problem_hash,
                                 std::string source)
    : grid_(std::move(grid)),
      modes_(mode_count),
      nodes_(grid_.node_count()),
      tol_(tol),
      problem_hash_(std::move(problem_hash)),
      source_(std::move(source)),
      target_((grid_.steps + 1) * modes_ * nodes_, 0)
{}

std::size_t SwitchingPolicy::switch_count(Mode current) const
{
    std::size_t c = 0;
    for (std::size_t n = 0; n <= grid_.steps; ++n) {
        for (std::size_t node = 0; node < nodes_; ++node) {
            c += decision(n, node, current) != 0 ? 1 : 0;
        }
    }
    return c;
}

std::string SwitchingPolicy::region_csv(Mode current) const
{
    std::ostringstream os;
    os << "# switch region for mode " << current << " (0 = continue, j = switch to mode j)\n";
    os << "# grid = " << grid_.describe() << '\n';
    os << "# problem_hash = " << problem_hash_ << '\n';
    for (std::size_t n = 0; n <= grid_.steps; ++n) {
        for (std::size_t node = 0; node < nodes_; ++node) {
            os << (node ? "," : "") << decision(n, node, current);
        }
        os << '\n';
    }
    return os.str();
}

SwitchingPolicy extract_policy(const ValueField& v, const TabulatedProblem& tab, double tol)
{
    if (!(tol > 0.0)) {
        throw std::invalid_argument("extract_policy: tol must be positive");
    }
    if (!(v.grid() == tab.grid()) || v.mode_count() != tab.mode_count()) {
        throw std::invalid_argument("extract_policy: value field does not match the problem grid");
    }
    const std::size_t m = v.mode_count();
    SwitchingPolicy pol(v.grid(), m, tol, v.problem_hash(), v.scheme());
    for (std::size_t n = 0; n < v.grid().steps; ++n) {
        for (std::size_t node = 0; node < v.node_count(); ++node) {
            for (std::size_t i = 0; i < m; ++i) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t arg = i;
                for (std::size_t j = 0; j < m; ++j) {
                    if (j == i) {
                        continue;
                    }
                    const double cand = -tab.cost(i, j, n, node) + v.at(j, n, node);
                    if (cand > best) {
                        best = cand;
                        arg = j;
                    }
                }
                if (arg != i && v.at(i, n, node) <= best + tol) {
                    pol.set(n, node, static_cast<Mode>(i + 1), static_cast<Mode>(arg + 1));
                }
            }
        }
    }
    return pol;
}

SwitchingPolicy extract_policy(const ValueField& v, const SwitchingProblem& p, double tol)
{
    return extract_policy(v, TabulatedProblem(p, v.grid()), tol);
}

Mode PolicyStrategy::decide(std::size_t n, double, std::span<const double> x, Mode current, std::size_t) const
{
    return policy_.decision(n, policy_.grid().nearest_node(x), current);
}

TimedStrategy::TimedStrategy(std::vector<TimedRule> rules) : rules_(std::move(rules))
{
    for (std::size_t k = 1; k < rules_.size(); ++k) {
        if (rules_[k].time < rules_[k - 1].time) {
            throw StrategyFormatError("timed strategy: rule times must be non-decreasing");
        }
    }
}

Mode TimedStrategy::decide(std::size_t, double t, std::span<const double>, Mode current, std::size_t) const
{
    Mode wanted = 0;
    for (const auto& r : rules_) {
        if (r.time <= t) {
            wanted = r.to;
        }
    }
    return (wanted == 0 || wanted == current) ? 0 : wanted;
}

std::string TimedStrategy::describe() const
{
    if (rules_.empty()) {
        return "never";
    }
    std::string s = "timed:";
    for (std::size_t k = 0; k < rules_.size(); ++k) {
        s += (k ? "," : "") + format_double(rules_[k].time) + ">" + std::to_string(rules_[k].to);
    }
    return s;
}

ThresholdStrategy::ThresholdStrategy(std::vector<ThresholdRule> rules, std::size_t budget)
    : rules_(std::move(rules)), budget_(budget)
{}

Mode ThresholdStrategy::decide(std::size_t, double, std::span<const double> x, Mode current,
                               std::size_t switches) const
{
    if (switches >= budget_) {
        return 0;
    }
    for (const auto& r : rules_) {
        if (r.from != current) {
            continue;
        }
        const double xi = x[r.axis];
        if (r.above ? xi > r.level : xi < r.level) {
            return r.to;
        }
    }
    return 0;
}

std::string ThresholdStrategy::describe() const
{
    std::string s = "threshold:budget=" + std::to_string(budget_);
    for (const auto& r : rules_) {
        s += ";" + std::to_string(r.from) + ">" + std::to_string(r.to) + "@x" + std::to_string(r.axis + 1) +
             (r.above ? ">" : "<") + format_double(r.level);
    }
    return s;
}

namespace {

Mode parse_mode(const std::string& s, const SwitchingProblem& p)
{
    long long v = 0;
    try {
        v = parse_int(s, "mode");
    } catch (const std::invalid_argument& e) {
        throw StrategyFormatError(e.what());
    }
    if (v < 1 || v > static_cast<long long>(p.mode_count)) {
        throw StrategyFormatError("strategy: mode " + s + " out of range");
    }
    return static_cast<Mode>(v);
}

double parse_number(const std::string& s, const char* what)
{
    try {
        return parse_double(s, what);
    } catch (const std::invalid_argument& e) {
        throw StrategyFormatError(e.what());
    }
}

}  // namespace

std::unique_ptr<Strategy> parse_strategy(const std::string& text, const SwitchingProblem& p)
{
    const std::string s = trim(text);
    if (s == "never") {
        return std::make_unique<TimedStrategy>(std::vector<TimedRule>{});
    }
    if (s.rfind("timed:", 0) == 0) {
        std::vector<TimedRule> rules;
        for (const auto& item : split(s.substr(6), ',')) {
            const auto gt = item.find('>');
            if (gt == std::string::npos) {
                throw StrategyFormatError("timed strategy: expected time>mode, got '" + item + "'");
            }
            rules.push_back({parse_number(item.substr(0, gt), "switch time"), parse_mode(item.substr(gt + 1), p)});
        }
        return std::make_unique<TimedStrategy>(std::move(rules));
    }
    if (s.rfind("threshold:", 0) == 0) {
        std::size_t budget = 0;
        bool have_budget = false;
        std::vector<ThresholdRule> rules;
        for (const auto& item : split(s.substr(10), ';')) {
            if (item.rfind("budget=", 0) == 0) {
                const double b = parse_number(item.substr(7), "budget");
                if (b < 0 || b != std::floor(b)) {
                    throw StrategyFormatError("threshold strategy: budget must be a non-negative integer");
                }
                budget = static_cast<std::size_t>(b);
                have_budget = true;
                continue;
            }
            // from>to@xK<level  or  from>to@xK>level
            const auto gt = item.find('>');
            const auto at = item.find('@');
            if (gt == std::string::npos || at == std::string::npos || at < gt) {
                throw StrategyFormatError("threshold strategy: malformed rule '" + item + "'");
            }
            ThresholdRule r;
            r.from = parse_mode(item.substr(0, gt), p);
            r.to = parse_mode(item.substr(gt + 1, at - gt - 1), p);
            if (r.from == r.to) {
                throw StrategyFormatError("threshold strategy: rule switches a mode to itself");
            }
            const std::string cond = item.substr(at + 1);
            const auto op = cond.find_first_of("<>");
            if (op == std::string::npos || cond.size() < 2 || cond[0] != 'x') {
                throw StrategyFormatError("threshold strategy: malformed condition '" + cond + "'");
            }
            const double axis = parse_number(cond.substr(1, op - 1), "axis");
            if (axis < 1 || axis > static_cast<double>(p.state_dim) || axis != std::floor(axis)) {
                throw StrategyFormatError("threshold strategy: axis out of range in '" + cond + "'");
            }
            r.axis = static_cast<std::size_t>(axis) - 1;
            r.above = cond[op] == '>';
            r.level = parse_number(cond.substr(op + 1), "level");
            rules.push_back(r);
        }
        if (!have_budget) {
            throw StrategyFormatError("threshold strategy: missing budget=N");
        }
        return std::make_unique<ThresholdStrategy>(std::move(rules), budget);
    }
    throw StrategyFormatError("unknown strategy '" + s + "' (expected never, timed:..., threshold:...)");
}

std::vector<ThresholdStrategy> random_threshold_strategies(const SwitchingProblem& p, const GridSpec& grid,
                                                           std::size_t count, std::uint64_t seed)
{
    std::mt19937_64 rng(path_seed(seed, 0x5eed));
    std::vector<ThresholdStrategy> out;
    out.reserve(count);
    const auto m = static_cast<Mode>(p.mode_count);
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<ThresholdRule> rules;
        if (m > 1) {
            for (Mode from = 1; from <= m; ++from) {
                ThresholdRule r;
                r.from = from;
                Mode to = std::uniform_int_distribution<Mode>(1, m - 1)(rng);
                r.to = to >= from ? to + 1 : to;
                r.axis = std::uniform_int_distribution<std::size_t>(0, p.state_dim - 1)(rng);
                r.above = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
                const Axis& a = grid.axes[r.axis];
                const double span = a.hi - a.lo;
                r.level = std::uniform_real_distribution<double>(a.lo + 0.1 * span, a.hi - 0.1 * span)(rng);
                rules.push_back(r);
            }
        }
        const auto budget = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
        out.emplace_back(std::move(rules), budget);
    }
    return out;
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index)
{
    // splitmix64 finaliser over a mix of the run seed and the path index
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double pairwise_sum(std::span<const double> xs)
{
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) {
            s += x;
        }
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

PathRecord simulate_path(const SwitchingProblem& p, const GridSpec& grid, const Strategy& strategy,
                         std::uint64_t seed, std::size_t path_index, std::size_t substeps, bool keep_states)
{
    if (substeps == 0) {
        throw std::invalid_argument("simulate: substeps must be positive");
    }
    std::mt19937_64 rng(path_seed(seed, path_index));
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t k = p.state_dim;
    const std::size_t d = p.brownian_dim;
    const std::size_t m = p.mode_count;
    const double h = grid.dt() / static_cast<double>(substeps);
    const double sqrt_h = std::sqrt(h);

    PathRecord rec;
    std::vector<double> x = p.x0;
    std::vector<double> z(d);
    std::vector<double> step(k);
    Mode mode = p.initial_mode;
    if (keep_states) {
        rec.states.push_back(x);
    }

    for (std::size_t n = 0; n < grid.steps; ++n) {
        const double tn = grid.time(n);
        std::size_t chain = 0;
        for (;;) {
            const Mode target = strategy.decide(n, tn, x, mode, rec.switches.size());
            if (target == 0 || target == mode) {
                break;
            }
            if (target < 1 || target > static_cast<Mode>(m)) {
                throw std::out_of_range("strategy requested mode " + std::to_string(target));
            }
            if (!strategy.chains() && chain == 1) {
                break;
            }
            if (chain == m - 1) {
                // A longer chain revisits a mode: a non-positive cycle.
                rec.aborted = true;
                rec.J = rec.profit - rec.costs;
                return rec;
            }
            const double c = p.switch_cost(mode, target, tn, x);
            rec.costs += c;
            rec.switches.push_back({tn, mode, target, c});
            if (c < 0.0) {
                ++rec.negative_cost_switches;
            }
            mode = target;
            ++chain;
        }

        for (std::size_t s = 0; s < substeps; ++s) {
            const double ts = tn + static_cast<double>(s) * h;
            rec.profit += p.profit_rate(mode, ts, x) * h;
            const auto b = p.drift_at(ts, x);
            for (auto& zi : z) {
                zi = normal(rng);
            }
            for (std::size_t r = 0; r < k; ++r) {
                double diffusion = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    diffusion += p.vol[r][c].eval(ts, x) * z[c];
                }
                step[r] = b[r] * h + diffusion * sqrt_h;
            }
            for (std::size_t r = 0; r < k; ++r) {
                x[r] += step[r];
            }
        }
        if (keep_states) {
            rec.states.push_back(x);
        }
    }
    rec.J = rec.profit - rec.costs;
    return rec;
}

StrategyStats simulate(const SwitchingProblem& p, const GridSpec& grid, const Strategy& strategy,
                       const SimulationOptions& opts)
{
    if (opts.path_count == 0) {
        throw std::invalid_argument("simulate: path_count must be at least 1");
    }
    p.check_shape();
    if (grid.dim() != p.state_dim || grid.horizon != p.horizon) {
        throw std::invalid_argument("simulate: grid is not compatible with the problem");
    }

    StrategyStats st;
    st.label = strategy.describe();
    st.path_count = opts.path_count;
    st.per_path.reserve(opts.path_count);
    std::vector<double> js;
    std::vector<double> profits;
    std::vector<double> costs;
    js.reserve(opts.path_count);

    for (std::size_t idx = 0; idx < opts.path_count; ++idx) {
        const PathRecord rec = simulate_path(p, grid, strategy, opts.seed, idx, opts.substeps, false);
        if (rec.aborted) {
            ++st.guard_trips;
            st.per_path.emplace_back(rec.switches.size(), std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        js.push_back(rec.J);
        profits.push_back(rec.profit);
        costs.push_back(rec.costs);
        ++st.switch_histogram[rec.switches.size()];
        ++st.negative_switch_histogram[rec.negative_cost_switches];
        st.per_path.emplace_back(rec.switches.size(), rec.J);
    }

    st.completed = js.size();
    st.assumption_suspect = st.guard_trips > 0;
    if (st.completed == 0) {
        st.mean_J = st.std_error = st.sample_std = std::numeric_limits<double>::quiet_NaN();
        return st;
    }
    const double cnt = static_cast<double>(st.completed);
    st.mean_J = pairwise_sum(js) / cnt;
    st.mean_profit = pairwise_sum(profits) / cnt;
    st.mean_cost = pairwise_sum(costs) / cnt;
    if (st.completed > 1) {
        std::vector<double> sq(js.size());
        for (std::size_t k = 0; k < js.size(); ++k) {
            sq[k] = (js[k] - st.mean_J) * (js[k] - st.mean_J);
        }
        st.sample_std = std::sqrt(pairwise_sum(sq) / (cnt - 1.0));
        st.std_error = st.sample_std / std::sqrt(cnt);
    }
    return st;
}

std::string StrategyStats::to_text() const
{
    std::ostringstream os;
    os << "strategy = " << label << '\n';
    os << "path_count = " << path_count << '\n';
    os << "completed = " << completed << '\n';
    os << "mean_J = " << format_double(mean_J) << '\n';
    os << "std_error = " << format_double(std_error) << '\n';
    os << "sample_std = " << format_double(sample_std) << '\n';
    os << "mean_profit = " << format_double(mean_profit) << '\n';
    os << "mean_cost = " << format_double(mean_cost) << '\n';
    os << "guard_trips = " << guard_trips << '\n';
    os << "assumption_suspect = " << (assumption_suspect ? "true" : "false") << '\n';
    for (const auto& [k, v] : switch_histogram) {
        os << "switch_histogram." << k << " = " << v << '\n';
    }
    for (const auto& [k, v] : negative_switch_histogram) {
        os << "negative_switch_histogram." << k << " = " << v << '\n';
    }
    return os.str();
}

std::string StrategyStats::paths_csv() const
{
    std::ostringstream os;
    os << "path,switches,J\n";
    for (std::size_t k = 0; k < per_path.size(); ++k) {
        os << k << ',' << per_path[k].first << ',' << format_double(per_path[k].second) << '\n';
    }
    return os.str();
}

}  // namespace mswitch
