#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psnap/checker.hpp"
#include "psnap/experiments.hpp"
#include "psnap/sim.hpp"

namespace fs = std::filesystem;
using namespace psnap;

namespace {

std::vector<Algorithm> parse_algorithms(const std::string& a) {
    if (a == "cps") return {Algorithm::Cps};
    if (a == "css") return {Algorithm::Css};
    if (a == "both") return {Algorithm::Cps, Algorithm::Css};
    throw CLI::ValidationError("--algorithm must be cps, css or both");
}

int cmd_run(const std::string& algorithm, int nodes, double comm_prob,
            double init_prob, int iterations, std::uint64_t seed_base,
            bool workload, bool trace, const std::string& out_dir, int threads) {
    fs::create_directories(out_dir);
    PointSpec spec;
    spec.param = "N";
    spec.value = nodes;
    spec.n = nodes;
    spec.comm_prob = comm_prob;
    spec.init_prob = init_prob;
    spec.iterations = iterations;
    spec.seed_base = seed_base;
    spec.workload = workload;
    spec.algorithms = parse_algorithms(algorithm);
    std::vector<CsvRow> rows = run_point(spec, threads);
    std::string csv_path = (fs::path(out_dir) / "results.csv").string();
    write_csv(csv_path, rows);
    if (trace) {
        for (Algorithm alg : spec.algorithms) {
            Scenario sc;
            sc.n = nodes;
            sc.comm_prob = comm_prob;
            sc.init_prob = init_prob;
            sc.seed = seed_base;
            if (workload) sc.workload = standard_workload();
            RunResult res = run(sc, alg, RunOptions{});
            std::string name = std::string("trace_") +
                               std::string(algorithm_name(alg)) + "_seed" +
                               std::to_string(seed_base) + ".jsonl";
            std::ofstream tout((fs::path(out_dir) / name).string(),
                               std::ios::binary);
            res.log.write_jsonl(tout);
        }
    }
    std::cout << summary_text(summarize(rows));
    std::cout << "wrote " << csv_path << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              int threads) {
    SweepConfig config = SweepConfig::from_json_file(config_path);
    fs::create_directories(out_dir);
    std::vector<CsvRow> rows = run_sweep(config, threads);
    std::string csv_path = (fs::path(out_dir) / "sweep.csv").string();
    write_csv(csv_path, rows);
    std::cout << summary_text(summarize(rows));
    std::cout << "wrote " << csv_path << "\n";
    return 0;
}

int cmd_check(const std::string& trace_path) {
    std::ifstream in(trace_path);
    if (!in) {
        std::cerr << "cannot open " << trace_path << "\n";
        return 1;
    }
    EventLog log = EventLog::read_jsonl(in);
    int n = 0;
    for (const Event& ev : log.events) n = std::max({n, ev.node + 1, ev.peer + 1});
    VerdictReport report = check_all(log, n);
    std::cout << report.to_json() << "\n";
    return report.all_pass() ? 0 : 1;
}

int cmd_report(const std::string& in_dir) {
    std::vector<CsvRow> rows;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_dir))
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files) {
        std::vector<CsvRow> part = read_csv(p.string());
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) {
        std::cerr << "no CSV files in " << in_dir << "\n";
        return 1;
    }
    std::cout << summary_text(summarize(rows));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concurrent partial snapshot simulator and checker"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware)");

    auto* run_cmd = app.add_subcommand("run", "run iterations at one setting");
    std::string algorithm = "both";
    int nodes = 100;
    double comm_prob = 0.1, init_prob = 0.1;
    int iterations = 100;
    std::uint64_t seed_base = 0;
    bool workload = false, trace = false;
    std::string out_dir = "out";
    run_cmd->add_option("--algorithm", algorithm, "cps, css or both");
    run_cmd->add_option("--nodes", nodes, "number of nodes")->required();
    run_cmd->add_option("--comm-prob", comm_prob, "communication probability");
    run_cmd->add_option("--init-prob", init_prob, "initiation probability");
    run_cmd->add_option("--iterations", iterations, "iterations");
    run_cmd->add_option("--seed-base", seed_base, "seed of iteration 0");
    run_cmd->add_flag("--workload", workload, "enable application traffic");
    run_cmd->add_flag("--trace", trace, "also write a trace for iteration 0");
    run_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "sweep a parameter");
    std::string config_path;
    std::string sweep_out = "out";
    sweep_cmd->add_option("--config", config_path, "sweep config JSON")
        ->required();
    sweep_cmd->add_option("--out", sweep_out, "output directory")->required();

    auto* check_cmd = app.add_subcommand("check", "check a trace file");
    std::string trace_path;
    check_cmd->add_option("--trace", trace_path, "trace JSONL file")->required();

    auto* report_cmd = app.add_subcommand("report", "summarize CSV results");
    std::string in_dir;
    report_cmd->add_option("--in", in_dir, "directory of CSV files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed())
            return cmd_run(algorithm, nodes, comm_prob, init_prob, iterations,
                           seed_base, workload, trace, out_dir, threads);
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, sweep_out, threads);
        if (check_cmd->parsed()) return cmd_check(trace_path);
        if (report_cmd->parsed()) return cmd_report(in_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
