#include "mswitch/config.hpp"

#include "mswitch/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mswitch {

namespace {

struct Entry {
    std::string value;
    std::size_t line = 0;
    bool used = false;
};

using Section = std::map<std::string, Entry>;

const std::set<std::string> kSections = {"problem", "grid", "solver", "simulate", "output"};

std::string unquote(const std::string& raw, std::size_t line)
{
    if (raw.empty() || raw.front() != '"') {
        return raw;
    }
    if (raw.size() < 2 || raw.back() != '"') {
        throw ConfigError("unterminated quoted value", line);
    }
    const std::string inner = raw.substr(1, raw.size() - 2);
    if (inner.find('"') != std::string::npos) {
        throw ConfigError("stray quote inside value", line);
    }
    return inner;
}

// A '#' or ';' after whitespace and outside quotes starts a trailing comment.
std::string strip_comment(const std::string& s)
{
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') {
            quoted = !quoted;
        } else if (!quoted && (s[i] == '#' || s[i] == ';') && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) {
            return s.substr(0, i);
        }
    }
    return s;
}

class Reader {
public:
    explicit Reader(std::map<std::string, Section> sections) : sections_(std::move(sections)) {}

    const Entry* find(const std::string& section, const std::string& key)
    {
        auto s = sections_.find(section);
        if (s == sections_.end()) {
            return nullptr;
        }
        auto e = s->second.find(key);
        if (e == s->second.end()) {
            return nullptr;
        }
        e->second.used = true;
        return &e->second;
    }

    const Entry& need(const std::string& section, const std::string& key)
    {
        const Entry* e = find(section, key);
        if (!e) {
            throw ConfigError("missing key '" + key + "' in [" + section + "]", 0);
        }
        return *e;
    }

    void check_all_used() const
    {
        for (const auto& [name, sec] : sections_) {
            for (const auto& [key, e] : sec) {
                if (!e.used) {
                    throw ConfigError("unknown key '" + key + "' in [" + name + "]", e.line);
                }
            }
        }
    }

private:
    std::map<std::string, Section> sections_;
};

template <class F>
auto at_line(const Entry& e, F&& f)
{
    try {
        return f(e.value);
    } catch (const ConfigError&) {
        throw;
    } catch (const ParseError& ex) {
        throw ConfigError(std::string(ex.what()) + " (column " + std::to_string(ex.position() + 1) + ")", e.line);
    } catch (const std::exception& ex) {
        throw ConfigError(ex.what(), e.line);
    }
}

double number(const Entry& e, const std::string& what)
{
    return at_line(e, [&](const std::string& v) { return parse_double(v, what); });
}

std::size_t count(const Entry& e, const std::string& what, long long min)
{
    return at_line(e, [&](const std::string& v) {
        const long long n = parse_int(v, what);
        if (n < min) {
            throw ConfigError(what + " must be at least " + std::to_string(min), e.line);
        }
        return static_cast<std::size_t>(n);
    });
}

std::vector<double> numbers(const Entry& e, const std::string& what, std::size_t expected)
{
    return at_line(e, [&](const std::string& v) {
        std::vector<double> out;
        for (const auto& item : split(v, ',')) {
            out.push_back(parse_double(trim(item), what));
        }
        if (out.size() != expected) {
            throw ConfigError(what + ": expected " + std::to_string(expected) + " values, got " +
                                  std::to_string(out.size()),
                              e.line);
        }
        return out;
    });
}

Expr expression(const Entry& e, std::size_t dim)
{
    return at_line(e, [&](const std::string& v) { return Expr::parse(v, dim); });
}

std::map<std::string, Section> scan(const std::string& text)
{
    std::map<std::string, Section> sections;
    std::string current;
    std::istringstream is(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const std::string s = trim(strip_comment(raw));
        if (s.empty()) {
            continue;
        }
        if (s.front() == '[') {
            if (s.back() != ']') {
                throw ConfigError("malformed section header", line);
            }
            current = trim(std::string_view(s).substr(1, s.size() - 2));
            if (!kSections.count(current)) {
                throw ConfigError("unknown section [" + current + "]", line);
            }
            sections[current];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected key = value", line);
        }
        if (current.empty()) {
            throw ConfigError("key outside of any section", line);
        }
        const std::string key = trim(std::string_view(s).substr(0, eq));
        if (key.empty()) {
            throw ConfigError("empty key", line);
        }
        auto& sec = sections[current];
        if (sec.count(key)) {
            throw ConfigError("duplicate key '" + key + "' (first on line " + std::to_string(sec[key].line) + ")",
                              line);
        }
        sec[key] = Entry{unquote(trim(std::string_view(s).substr(eq + 1)), line), line, false};
    }
    return sections;
}

std::string quoted(const Expr& e) { return '"' + e.to_string() + '"'; }

}  // namespace

ConfigError::ConfigError(const std::string& what, std::size_t line)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
{}

std::string to_string(Engine e)
{
    switch (e) {
    case Engine::Lattice: return "lattice";
    case Engine::Pde: return "pde";
    case Engine::Both: return "both";
    }
    return "?";
}

Engine parse_engine(const std::string& s)
{
    if (s == "lattice") return Engine::Lattice;
    if (s == "pde") return Engine::Pde;
    if (s == "both") return Engine::Both;
    throw std::invalid_argument("unknown engine '" + s + "' (lattice, pde or both)");
}

RunConfig parse_config(const std::string& text)
{
    Reader r(scan(text));
    RunConfig c;
    SwitchingProblem& p = c.problem;

    p.horizon = number(r.need("problem", "horizon"), "horizon");
    if (!(p.horizon > 0.0)) {
        throw ConfigError("horizon must be positive", r.need("problem", "horizon").line);
    }
    p.state_dim = count(r.need("problem", "state_dim"), "state_dim", 1);
    const std::size_t k = p.state_dim;
    p.brownian_dim = k;
    if (const Entry* e = r.find("problem", "brownian_dim")) {
        p.brownian_dim = count(*e, "brownian_dim", 1);
    }
    p.mode_count = count(r.need("problem", "modes"), "modes", 1);
    const std::size_t m = p.mode_count;

    p.drift.assign(k, Expr());
    for (std::size_t a = 0; a < k; ++a) {
        if (const Entry* e = r.find("problem", "drift." + std::to_string(a + 1))) {
            p.drift[a] = expression(*e, k);
        }
    }
    p.vol.assign(k, std::vector<Expr>(p.brownian_dim, Expr()));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < p.brownian_dim; ++b) {
            if (const Entry* e = r.find("problem", "vol." + std::to_string(a + 1) + "." + std::to_string(b + 1))) {
                p.vol[a][b] = expression(*e, k);
            }
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        p.profit.push_back(expression(r.need("problem", "profit." + std::to_string(i + 1)), k));
    }
    p.cost.assign(m, std::vector<Expr>(m, Expr()));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const std::string key = "cost." + std::to_string(i + 1) + "." + std::to_string(j + 1);
            if (i == j) {
                // Only accepted so the validator can complain about a non-zero diagonal.
                if (const Entry* e = r.find("problem", key)) {
                    p.cost[i][j] = expression(*e, k);
                }
                continue;
            }
            p.cost[i][j] = expression(r.need("problem", key), k);
        }
    }
    if (const Entry* e = r.find("problem", "initial_mode")) {
        const std::size_t im = count(*e, "initial_mode", 1);
        if (im > m) {
            throw ConfigError("initial_mode exceeds modes", e->line);
        }
        p.initial_mode = static_cast<Mode>(im);
    }
    p.x0 = numbers(r.need("problem", "x0"), "x0", k);
    if (const Entry* e = r.find("problem", "neg_cost_bound")) {
        p.neg_cost_bound = static_cast<int>(count(*e, "neg_cost_bound", 0));
    }

    c.grid.horizon = p.horizon;
    c.grid.steps = count(r.need("grid", "steps"), "steps", 1);
    const auto lo = numbers(r.need("grid", "x_lo"), "x_lo", k);
    const auto hi = numbers(r.need("grid", "x_hi"), "x_hi", k);
    const Entry& ne = r.need("grid", "nodes");
    const auto nodes = numbers(ne, "nodes", k);
    for (std::size_t a = 0; a < k; ++a) {
        if (nodes[a] < 3 || nodes[a] != static_cast<double>(static_cast<std::size_t>(nodes[a]))) {
            throw ConfigError("nodes must be integers >= 3", ne.line);
        }
        if (!(hi[a] > lo[a])) {
            throw ConfigError("x_hi must exceed x_lo", r.need("grid", "x_hi").line);
        }
        c.grid.axes.push_back({lo[a], hi[a], static_cast<std::size_t>(nodes[a])});
    }
    try {
        c.grid.check();
        p.check_shape();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what(), 0);
    }

    if (const Entry* e = r.find("solver", "engine")) {
        c.solver.engine = at_line(*e, [](const std::string& v) { return parse_engine(v); });
    }
    if (const Entry* e = r.find("solver", "tol")) {
        c.solver.tol = number(*e, "tol");
        if (!(c.solver.tol > 0.0)) {
            throw ConfigError("tol must be positive", e->line);
        }
    }
    if (const Entry* e = r.find("solver", "max_outer")) {
        c.solver.max_outer = count(*e, "max_outer", 1);
    }
    if (const Entry* e = r.find("solver", "policy_tol")) {
        c.solver.policy_tol = number(*e, "policy_tol");
        if (!(c.solver.policy_tol > 0.0)) {
            throw ConfigError("policy_tol must be positive", e->line);
        }
    }

    if (const Entry* e = r.find("simulate", "paths")) {
        c.simulate.paths = count(*e, "paths", 1);
    }
    if (const Entry* e = r.find("simulate", "seed")) {
        c.simulate.seed = count(*e, "seed", 0);
    }
    if (const Entry* e = r.find("simulate", "substeps")) {
        c.simulate.substeps = count(*e, "substeps", 1);
    }

    if (const Entry* e = r.find("output", "directory")) {
        if (e->value.empty()) {
            throw ConfigError("empty output directory", e->line);
        }
        c.output.directory = e->value;
    }
    if (const Entry* e = r.find("output", "formats")) {
        static const std::set<std::string> known = {"values", "regions", "surfaces", "paths"};
        c.output.formats.clear();
        for (const auto& item : split(e->value, ',')) {
            const std::string f = trim(item);
            if (f.empty() && trim(e->value).empty()) {
                break;
            }
            if (!known.count(f)) {
                throw ConfigError("unknown output format '" + f + "'", e->line);
            }
            c.output.formats.push_back(f);
        }
    }

    r.check_all_used();
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path, 0);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string RunConfig::to_text() const
{
    const SwitchingProblem& p = problem;
    std::ostringstream os;
    os << "[problem]\n";
    os << "horizon = " << format_double(p.horizon) << '\n';
    os << "state_dim = " << p.state_dim << '\n';
    os << "brownian_dim = " << p.brownian_dim << '\n';
    os << "modes = " << p.mode_count << '\n';
    for (std::size_t a = 0; a < p.drift.size(); ++a) {
        os << "drift." << a + 1 << " = " << quoted(p.drift[a]) << '\n';
    }
    for (std::size_t a = 0; a < p.vol.size(); ++a) {
        for (std::size_t b = 0; b < p.vol[a].size(); ++b) {
            os << "vol." << a + 1 << '.' << b + 1 << " = " << quoted(p.vol[a][b]) << '\n';
        }
    }
    for (std::size_t i = 0; i < p.profit.size(); ++i) {
        os << "profit." << i + 1 << " = " << quoted(p.profit[i]) << '\n';
    }
    for (std::size_t i = 0; i < p.cost.size(); ++i) {
        for (std::size_t j = 0; j < p.cost[i].size(); ++j) {
            if (i == j && p.cost[i][j].is_constant() && p.cost[i][j].eval(0.0, p.x0) == 0.0) {
                continue;
            }
            os << "cost." << i + 1 << '.' << j + 1 << " = " << quoted(p.cost[i][j]) << '\n';
        }
    }
    os << "initial_mode = " << p.initial_mode << '\n';
    os << "x0 = " << join_doubles(p.x0, ", ") << '\n';
    os << "neg_cost_bound = " << p.neg_cost_bound << '\n';

    std::vector<double> lo, hi, nodes;
    for (const auto& ax : grid.axes) {
        lo.push_back(ax.lo);
        hi.push_back(ax.hi);
        nodes.push_back(static_cast<double>(ax.nodes));
    }
    os << "\n[grid]\n";
    os << "steps = " << grid.steps << '\n';
    os << "x_lo = " << join_doubles(lo, ", ") << '\n';
    os << "x_hi = " << join_doubles(hi, ", ") << '\n';
    os << "nodes = " << join_doubles(nodes, ", ") << '\n';

    os << "\n[solver]\n";
    os << "engine = " << to_string(solver.engine) << '\n';
    os << "tol = " << format_double(solver.tol) << '\n';
    os << "max_outer = " << solver.max_outer << '\n';
    os << "policy_tol = " << format_double(solver.policy_tol) << '\n';

    os << "\n[simulate]\n";
    os << "paths = " << simulate.paths << '\n';
    os << "seed = " << simulate.seed << '\n';
    os << "substeps = " << simulate.substeps << '\n';

    os << "\n[output]\n";
    os << "directory = \"" << output.directory << "\"\n";
    os << "formats = ";
    for (std::size_t i = 0; i < output.formats.size(); ++i) {
        os << (i ? ", " : "") << output.formats[i];
    }
    os << '\n';
    return os.str();
}

}  // namespace mswitch
