#include "mswitch/grid.hpp"

#include "mswitch/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mswitch {

double Axis::coord(std::size_t i) const
{
    if (i + 1 == nodes) {
        return hi;
    }
    return lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(nodes - 1);
}

void GridSpec::check() const
{
    if (steps == 0) {
        throw std::invalid_argument("grid: steps must be positive");
    }
    if (!(horizon > 0.0)) {
        throw std::invalid_argument("grid: horizon must be positive");
    }
    if (axes.empty() || axes.size() > 2) {
        throw std::invalid_argument("grid: state dimension must be 1 or 2, got " + std::to_string(axes.size()));
    }
    for (std::size_t d = 0; d < axes.size(); ++d) {
        const Axis& a = axes[d];
        if (a.nodes < 3) {
            throw std::invalid_argument("grid: axis " + std::to_string(d + 1) + " needs at least 3 nodes");
        }
        if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || !(a.hi > a.lo)) {
            throw std::invalid_argument("grid: axis " + std::to_string(d + 1) + " bounds must be finite with lo < hi");
        }
    }
}

std::size_t GridSpec::node_count() const
{
    std::size_t n = 1;
    for (const auto& a : axes) {
        n *= a.nodes;
    }
    return n;
}

double GridSpec::time(std::size_t n) const
{
    if (n == steps) {
        return horizon;
    }
    return horizon * static_cast<double>(n) / static_cast<double>(steps);
}

std::vector<std::size_t> GridSpec::unflatten(std::size_t node) const
{
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) {
        idx[d] = node % axes[d].nodes;
        node /= axes[d].nodes;
    }
    return idx;
}

std::size_t GridSpec::flatten(std::span<const std::size_t> idx) const
{
    std::size_t node = 0;
    std::size_t stride = 1;
    for (std::size_t d = 0; d < axes.size(); ++d) {
        node += idx[d] * stride;
        stride *= axes[d].nodes;
    }
    return node;
}

std::vector<double> GridSpec::coords(std::size_t node) const
{
    std::vector<double> x(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) {
        x[d] = axes[d].coord(node % axes[d].nodes);
        node /= axes[d].nodes;
    }
    return x;
}

bool GridSpec::on_boundary(std::size_t node) const
{
    for (std::size_t d = 0; d < axes.size(); ++d) {
        const std::size_t i = node % axes[d].nodes;
        if (i == 0 || i + 1 == axes[d].nodes) {
            return true;
        }
        node /= axes[d].nodes;
    }
    return false;
}

std::size_t GridSpec::nearest_node(std::span<const double> x) const
{
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) {
        const Axis& a = axes[d];
        const double u = (x[d] - a.lo) / a.spacing();
        double r = std::floor(u);
        if (u - r > 0.5) {
            r += 1.0;
        }
        r = std::clamp(r, 0.0, static_cast<double>(a.nodes - 1));
        idx[d] = static_cast<std::size_t>(r);
    }
    return flatten(idx);
}

std::string GridSpec::describe() const
{
    std::string s = "steps=" + std::to_string(steps) + ";horizon=" + format_double(horizon);
    for (const auto& a : axes) {
        s += ";axis=" + format_double(a.lo) + ":" + format_double(a.hi) + ":" + std::to_string(a.nodes);
    }
    return s;
}

GridSpec GridSpec::parse_description(const std::string& text)
{
    GridSpec g;
    g.axes.clear();
    for (const auto& part : split(text, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("grid description: malformed item '" + part + "'");
        }
        const std::string key = trim(part.substr(0, eq));
        const std::string val = trim(part.substr(eq + 1));
        if (key == "steps") {
            g.steps = static_cast<std::size_t>(parse_int(val, "grid steps"));
        } else if (key == "horizon") {
            g.horizon = parse_double(val, "grid horizon");
        } else if (key == "axis") {
            const auto f = split(val, ':');
            if (f.size() != 3) {
                throw std::invalid_argument("grid description: axis needs lo:hi:nodes");
            }
            g.axes.push_back({parse_double(f[0], "axis lo"), parse_double(f[1], "axis hi"),
                              static_cast<std::size_t>(parse_int(f[2], "axis nodes"))});
        } else {
            throw std::invalid_argument("grid description: unknown key '" + key + "'");
        }
    }
    g.check();
    return g;
}

ValueField::ValueField(GridSpec grid, std::size_t mode_count, std::string problem_hash, std::string scheme)
    : grid_(std::move(grid)),
      modes_(mode_count),
      nodes_(grid_.node_count()),
      problem_hash_(std::move(problem_hash)),
      scheme_(std::move(scheme)),
      data_(modes_ * (grid_.steps + 1) * nodes_, 0.0)
{}

double ValueField::interpolate(std::size_t mode, std::size_t n, std::span<const double> x) const
{
    const std::size_t dim = grid_.dim();
    std::vector<std::size_t> base(dim);
    std::vector<double> frac(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const Axis& a = grid_.axes[d];
        const double u = std::clamp((x[d] - a.lo) / a.spacing(), 0.0, static_cast<double>(a.nodes - 1));
        std::size_t i = static_cast<std::size_t>(std::floor(u));
        if (i + 1 >= a.nodes) {
            i = a.nodes - 2;
        }
        base[d] = i;
        frac[d] = u - static_cast<double>(i);
    }
    double acc = 0.0;
    std::vector<std::size_t> idx(dim);
    for (std::size_t corner = 0; corner < (std::size_t{1} << dim); ++corner) {
        double w = 1.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const bool up = (corner >> d) & 1U;
            idx[d] = base[d] + (up ? 1 : 0);
            w *= up ? frac[d] : 1.0 - frac[d];
        }
        if (w != 0.0) {
            acc += w * at(mode, n, grid_.flatten(idx));
        }
    }
    return acc;
}

double ValueField::sup_distance(const ValueField& a, const ValueField& b)
{
    if (!(a.grid_ == b.grid_) || a.modes_ != b.modes_) {
        throw std::invalid_argument("sup_distance: value fields live on different grids");
    }
    double d = 0.0;
    for (std::size_t k = 0; k < a.data_.size(); ++k) {
        d = std::max(d, std::abs(a.data_[k] - b.data_[k]));
    }
    return d;
}

void ValueField::write(std::ostream& os) const
{
    os << "# mswitch value field v1\n";
    os << "# problem_hash = " << problem_hash_ << '\n';
    os << "# grid = " << grid_.describe() << '\n';
    os << "# scheme = " << scheme_ << '\n';
    os << "# modes = " << modes_ << '\n';
    os << "mode,time_index,node_index";
    for (std::size_t d = 0; d < grid_.dim(); ++d) {
        os << ",x" << d + 1;
    }
    os << ",value\n";
    for (std::size_t i = 0; i < modes_; ++i) {
        for (std::size_t n = 0; n <= grid_.steps; ++n) {
            for (std::size_t node = 0; node < nodes_; ++node) {
                os << i + 1 << ',' << n << ',' << node << ',' << join_doubles(grid_.coords(node)) << ','
                   << format_double(at(i, n, node)) << '\n';
            }
        }
    }
}

ValueField ValueField::read(std::istream& is)
{
    std::string line;
    std::string hash;
    std::string scheme;
    std::string grid_text;
    std::size_t modes = 0;
    while (std::getline(is, line)) {
        if (line.rfind("#", 0) != 0) {
            break;  // column header
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        const std::string key = trim(line.substr(1, eq - 1));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "problem_hash") {
            hash = val;
        } else if (key == "grid") {
            grid_text = val;
        } else if (key == "scheme") {
            scheme = val;
        } else if (key == "modes") {
            modes = static_cast<std::size_t>(parse_int(val, "modes"));
        }
    }
    if (grid_text.empty() || modes == 0) {
        throw std::runtime_error("value field: missing grid or modes header");
    }
    ValueField f(GridSpec::parse_description(grid_text), modes, hash, scheme);
    std::vector<bool> seen(f.data_.size(), false);
    std::size_t row = 0;
    while (std::getline(is, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        const auto cols = split(line, ',');
        if (cols.size() != 4 + f.grid_.dim()) {
            throw std::runtime_error("value field: row " + std::to_string(row) + " has " +
                                     std::to_string(cols.size()) + " columns");
        }
        const auto mode = parse_int(cols[0], "mode");
        const auto n = parse_int(cols[1], "time_index");
        const auto node = parse_int(cols[2], "node_index");
        if (mode < 1 || static_cast<std::size_t>(mode) > modes || n < 0 ||
            static_cast<std::size_t>(n) > f.grid_.steps || node < 0 ||
            static_cast<std::size_t>(node) >= f.nodes_) {
            throw std::runtime_error("value field: row " + std::to_string(row) + " index out of range");
        }
        const std::size_t k = (static_cast<std::size_t>(mode - 1) * (f.grid_.steps + 1) + static_cast<std::size_t>(n)) *
                                  f.nodes_ +
                              static_cast<std::size_t>(node);
        f.data_[k] = parse_double(cols.back(), "value");
        seen[k] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw std::runtime_error("value field: file is missing rows");
    }
    return f;
}

void ValueField::save(const std::string& path) const
{
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot write " + path);
    }
    write(os);
}

ValueField ValueField::load(const std::string& path)
{
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot read " + path);
    }
    return read(is);
}

}  // namespace mswitch
