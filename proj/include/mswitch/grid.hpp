#ifndef MSWITCH_GRID_HPP
#define MSWITCH_GRID_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mswitch {

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t nodes = 2;

    double spacing() const { return (hi - lo) / static_cast<double>(nodes - 1); }
    double coord(std::size_t i) const;

    bool operator==(const Axis&) const = default;
};

/// Uniform time-space grid: steps+1 time levels on [0, horizon] and a
/// tensor-product spatial grid in one or two dimensions. Node indices are
/// row-major with the first coordinate varying fastest.
struct GridSpec {
    std::size_t steps = 1;
    double horizon = 1.0;
    std::vector<Axis> axes;

    void check() const;

    std::size_t dim() const { return axes.size(); }
    std::size_t node_count() const;
    double dt() const { return horizon / static_cast<double>(steps); }
    /// t_n = n T / N, with t_N == T exactly.
    double time(std::size_t n) const;

    std::vector<double> coords(std::size_t node) const;
    /// Per-axis indices of a node.
    std::vector<std::size_t> unflatten(std::size_t node) const;
    std::size_t flatten(std::span<const std::size_t> idx) const;
    bool on_boundary(std::size_t node) const;
    /// Closest grid node to x (ties go to the lower index), clamped to the grid.
    std::size_t nearest_node(std::span<const double> x) const;

    /// `steps=200;horizon=1;axis=0:9.95:200` - also used in file headers.
    std::string describe() const;
    static GridSpec parse_description(const std::string& text);

    bool operator==(const GridSpec&) const = default;
};

/// Per-mode value arrays v_i(t_n, x_node). Modes are 0-based here.
class ValueField {
public:
    ValueField() = default;
    ValueField(GridSpec grid, std::size_t mode_count, std::string problem_hash, std::string scheme);

    double& at(std::size_t mode, std::size_t n, std::size_t node)
    {
        return data_[(mode * (grid_.steps + 1) + n) * nodes_ + node];
    }
    double at(std::size_t mode, std::size_t n, std::size_t node) const
    {
        return data_[(mode * (grid_.steps + 1) + n) * nodes_ + node];
    }

    std::span<double> slice(std::size_t mode, std::size_t n)
    {
        return {data_.data() + (mode * (grid_.steps + 1) + n) * nodes_, nodes_};
    }
    std::span<const double> slice(std::size_t mode, std::size_t n) const
    {
        return {data_.data() + (mode * (grid_.steps + 1) + n) * nodes_, nodes_};
    }

    /// Multilinear interpolation in space at time level n; x is clamped to the grid.
    double interpolate(std::size_t mode, std::size_t n, std::span<const double> x) const;

    const GridSpec& grid() const { return grid_; }
    std::size_t mode_count() const { return modes_; }
    std::size_t node_count() const { return nodes_; }
    const std::string& problem_hash() const { return problem_hash_; }
    const std::string& scheme() const { return scheme_; }
    void set_scheme(std::string s) { scheme_ = std::move(s); }
    std::span<const double> values() const { return data_; }

    /// max |a - b| over all entries; grids and mode counts must match.
    static double sup_distance(const ValueField& a, const ValueField& b);

    /// Columnar text: '#' header lines then `mode,time_index,node_index,x...,value`
    /// rows with 1-based modes.
    void write(std::ostream& os) const;
    static ValueField read(std::istream& is);
    void save(const std::string& path) const;
    static ValueField load(const std::string& path);

private:
    GridSpec grid_;
    std::size_t modes_ = 0;
    std::size_t nodes_ = 0;
    std::string problem_hash_;
    std::string scheme_;
    std::vector<double> data_;
};

}  // namespace mswitch

#endif  // MSWITCH_GRID_HPP
