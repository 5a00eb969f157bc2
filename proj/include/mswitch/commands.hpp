#ifndef MSWITCH_COMMANDS_HPP
#define MSWITCH_COMMANDS_HPP

#include "mswitch/config.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mswitch {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int error = 1;
inline constexpr int validation = 2;
inline constexpr int nonconvergence = 3;
inline constexpr int guard = 4;
}  // namespace exit_code

/// Command-line overrides layered on top of a RunConfig.
struct Overrides {
    std::optional<std::string> out;
    std::optional<Engine> engine;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    bool force = false;
};

void apply(const Overrides& o, RunConfig& c);

/// Each command writes its artifacts under c.output.directory and a short
/// human-readable log to `log`; the return value is the process exit status.
int cmd_validate(const RunConfig& c, std::ostream& log);
int cmd_solve(const RunConfig& c, bool force, std::ostream& log);

/// `strategy` is "optimal", "random:N" or anything parse_strategy accepts.
/// `value_path` empty means the lattice (then PDE) field in the output directory.
int cmd_simulate(const RunConfig& c, bool force, const std::string& strategy, const std::string& value_path,
                 std::ostream& log);

/// Writes summary.json into `dir`.
int cmd_report(const std::string& dir, std::ostream& log);

/// Artifact names cmd_report looks for.
const std::vector<std::string>& expected_artifacts();

}  // namespace mswitch

#endif  // MSWITCH_COMMANDS_HPP
