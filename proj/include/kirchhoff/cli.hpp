#ifndef KIRCHHOFF_CLI_HPP
#define KIRCHHOFF_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kirchhoff/graph_function.hpp"
#include "kirchhoff/kernel.hpp"
#include "kirchhoff/metric_tree.hpp"

namespace kirchhoff
{

inline constexpr const char* kToolVersion = "0.1.0";

struct RunConfig
{
    // validate | det-scan | resolvent-check | expand | evolve |
    // oracle-compare | dispersion | nls
    std::string command;
    std::string graph;
    std::string data;
    std::string points;
    std::string out;
    double eps = 1e-8;
    int threads = 0;
    std::uint64_t seed = 0;
    bool no_timestamp = false;

    double tau_max = 50.0;
    int samples = 10000;
    cplx omega = 1.0;
    bool dump_poly = false;

    double time = 1.0;
    double h = 0.01;
    double dt = 1e-3;
    double L = 40.0;
    // Comparison region for oracle-compare and default points for evolve;
    // 0 picks data support + 10.
    double reach = 0.0;

    double tmin = 0.1;
    double tmax = 100.0;
    int n = 20;

    double p = 2.0;
    int sign = -1;
    double T = 1.0;
    bool allow_any_p = false;
    int snapshot_every = 0;
    std::string snapshot_prefix;
};

// Parses a command line (argv[0] is the program name). Throws Error with
// ConfigError on invalid input. Returns false when help was printed.
bool parse_args(int argc, const char* const* argv, RunConfig& cfg, std::ostream& out);

// Runs one command. Returns 0 on success, otherwise the numeric error code,
// after writing a JSON error object to err.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// parse_args followed by run.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// CSV rows (edge id, x, re, im); rows are sorted per edge, lines starting
// with '#' and a header row are skipped. Throws SchemaError (malformed row,
// unknown edge, duplicate coordinate) and OutOfRangeCoordinate.
GraphFunction load_data(const std::string& path, const MetricTree& tree);

// CSV rows (edge id, x).
std::vector<EvalPoint> load_points(const std::string& path, const MetricTree& tree);

} // namespace kirchhoff

#endif // KIRCHHOFF_CLI_HPP
