#pragma once

#include <string>
#include <vector>

#include "psnap/sim.hpp"

namespace psnap {

// One CSV row: a single iteration of one algorithm at one sweep point.
struct CsvRow {
    std::string algorithm;
    std::string param;   // "N", "C" or "F"
    double value = 0;    // the swept parameter's value at this point
    int iteration = 0;
    std::uint64_t total_messages = 0;
    std::uint64_t marker_msgs = 0;
    std::uint64_t normal_msgs = 0;
    std::uint64_t collision_msgs = 0;
    std::uint64_t initnet_msgs = 0;
    std::uint64_t rounds = 0;
    std::uint64_t collisions = 0;
    std::uint64_t groups = 0;
    std::uint64_t initnet_size = 0;
};

struct PointSpec {
    std::string param = "N";
    double value = 0;
    int n = 0;
    double comm_prob = 0;
    double init_prob = 0;
    int iterations = 1;
    std::uint64_t seed_base = 0;
    bool workload = false;
    std::vector<Algorithm> algorithms;
};

struct SweepConfig {
    std::string param = "N";         // which of N, C, F varies
    std::vector<double> values;
    int n = 100;                     // fixed values for the other two
    double comm_prob = 0.1;
    double init_prob = 0.1;
    int iterations = 100;
    std::uint64_t seed_base = 0;
    bool workload = false;
    std::vector<Algorithm> algorithms{Algorithm::Cps, Algorithm::Css};

    static SweepConfig from_json_file(const std::string& path);
    static SweepConfig from_json_text(const std::string& text);
};

// Iterations run on worker threads; the row order is fixed regardless of
// thread count (algorithm-major, iteration-minor).
std::vector<CsvRow> run_point(const PointSpec& spec, int threads = 0);
std::vector<CsvRow> run_sweep(const SweepConfig& config, int threads = 0);

std::string csv_header();
std::string to_csv(const std::vector<CsvRow>& rows);
void write_csv(const std::string& path, const std::vector<CsvRow>& rows);
std::vector<CsvRow> read_csv(const std::string& path);

// Mean of every metric over the iterations of one (algorithm, point) pair.
struct SummaryRow {
    std::string algorithm;
    std::string param;
    double value = 0;
    int iterations = 0;
    double total_messages = 0;
    double marker_msgs = 0;
    double normal_msgs = 0;
    double collision_msgs = 0;
    double initnet_msgs = 0;
    double rounds = 0;
    double collisions = 0;
    double groups = 0;
    double initnet_size = 0;
};

std::vector<SummaryRow> summarize(const std::vector<CsvRow>& rows);
std::string summary_text(const std::vector<SummaryRow>& rows);

std::string format_value(double v);

}  // namespace psnap
