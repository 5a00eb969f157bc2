#ifndef MSWITCH_CONFIG_HPP
#define MSWITCH_CONFIG_HPP

#include "mswitch/grid.hpp"
#include "mswitch/problem.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mswitch {

enum class Engine { Lattice, Pde, Both };

std::string to_string(Engine e);
Engine parse_engine(const std::string& s);

struct SolverSettings {
    Engine engine = Engine::Lattice;
    double tol = 1e-8;
    std::size_t max_outer = 50;
    /// Slack used when reading switch regions off a value field.
    double policy_tol = 1e-9;
};

struct SimulateSettings {
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    std::size_t substeps = 1;
};

struct OutputSettings {
    std::string directory = "out";
    /// Subset of {values, regions, surfaces, paths}.
    std::vector<std::string> formats = {"values", "regions", "surfaces"};
};

struct RunConfig {
    SwitchingProblem problem;
    GridSpec grid;
    SolverSettings solver;
    SimulateSettings simulate;
    OutputSettings output;

    /// Canonical text; parse_config(to_text()) reproduces this config.
    std::string to_text() const;
    bool operator==(const RunConfig& other) const { return to_text() == other.to_text(); }
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::size_t line);
    /// 1-based line, 0 when the problem is not tied to one line.
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace mswitch

#endif  // MSWITCH_CONFIG_HPP
