#include "psnap/experiments.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace psnap {

using nlohmann::json;

std::string format_value(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::ostringstream os;
        os << static_cast<long long>(v);
        return os.str();
    }
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

SweepConfig SweepConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    SweepConfig c;
    c.param = j.value("param", c.param);
    if (c.param != "N" && c.param != "C" && c.param != "F")
        throw std::runtime_error("sweep param must be N, C or F");
    for (const auto& v : j.at("values")) c.values.push_back(v.get<double>());
    c.n = j.value("n", c.n);
    c.comm_prob = j.value("comm_prob", c.comm_prob);
    c.init_prob = j.value("init_prob", c.init_prob);
    c.iterations = j.value("iterations", c.iterations);
    c.seed_base = j.value("seed_base", c.seed_base);
    c.workload = j.value("workload", c.workload);
    if (j.contains("algorithm")) {
        std::string a = j["algorithm"].get<std::string>();
        if (a == "cps")
            c.algorithms = {Algorithm::Cps};
        else if (a == "css")
            c.algorithms = {Algorithm::Css};
        else if (a == "both")
            c.algorithms = {Algorithm::Cps, Algorithm::Css};
        else
            throw std::runtime_error("algorithm must be cps, css or both");
    }
    return c;
}

SweepConfig SweepConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

namespace {

CsvRow make_row(const PointSpec& spec, Algorithm alg, int iteration,
                const RunResult& result) {
    const RunMetrics& m = result.metrics;
    CsvRow r;
    r.algorithm = algorithm_name(alg);
    r.param = spec.param;
    r.value = spec.value;
    r.iteration = iteration;
    r.total_messages = m.total_messages;
    r.marker_msgs = m.marker_msgs;
    r.normal_msgs = m.normal_msgs;
    r.collision_msgs = m.collision_msgs;
    r.initnet_msgs = m.initnet_msgs;
    r.rounds = m.total_rounds;
    r.collisions = m.collisions;
    r.groups = m.group_count;
    r.initnet_size = m.initnet_size;
    return r;
}

}  // namespace

std::vector<CsvRow> run_point(const PointSpec& spec, int threads) {
    if (threads <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        threads = hw ? static_cast<int>(hw) : 1;
    }
    const int iters = spec.iterations;
    std::vector<std::vector<CsvRow>> slots(iters);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= iters) return;
            Scenario sc;
            sc.n = spec.n;
            sc.comm_prob = spec.comm_prob;
            sc.init_prob = spec.init_prob;
            sc.seed = spec.seed_base + static_cast<std::uint64_t>(i);
            if (spec.workload) sc.workload = standard_workload();
            for (Algorithm alg : spec.algorithms) {
                RunResult res = run(sc, alg, RunOptions{});
                slots[i].push_back(make_row(spec, alg, i, res));
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<CsvRow> rows;
    for (std::size_t a = 0; a < spec.algorithms.size(); ++a)
        for (int i = 0; i < iters; ++i) rows.push_back(slots[i][a]);
    return rows;
}

std::vector<CsvRow> run_sweep(const SweepConfig& config, int threads) {
    std::vector<CsvRow> rows;
    for (double v : config.values) {
        PointSpec spec;
        spec.param = config.param;
        spec.value = v;
        spec.n = config.n;
        spec.comm_prob = config.comm_prob;
        spec.init_prob = config.init_prob;
        if (config.param == "N")
            spec.n = static_cast<int>(v);
        else if (config.param == "C")
            spec.comm_prob = v;
        else
            spec.init_prob = v;
        spec.iterations = config.iterations;
        spec.seed_base = config.seed_base;
        spec.workload = config.workload;
        spec.algorithms = config.algorithms;
        std::vector<CsvRow> point = run_point(spec, threads);
        rows.insert(rows.end(), point.begin(), point.end());
    }
    return rows;
}

std::string csv_header() {
    return "algorithm,param,value,iteration,total_messages,marker_msgs,"
           "normal_msgs,collision_msgs,initnet_msgs,rounds,collisions,groups,"
           "initnet_size";
}

std::string to_csv(const std::vector<CsvRow>& rows) {
    std::ostringstream os;
    os << csv_header() << '\n';
    for (const CsvRow& r : rows) {
        os << r.algorithm << ',' << r.param << ',' << format_value(r.value)
           << ',' << r.iteration << ',' << r.total_messages << ','
           << r.marker_msgs << ',' << r.normal_msgs << ',' << r.collision_msgs
           << ',' << r.initnet_msgs << ',' << r.rounds << ',' << r.collisions
           << ',' << r.groups << ',' << r.initnet_size << '\n';
    }
    return os.str();
}

void write_csv(const std::string& path, const std::vector<CsvRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_csv(rows);
}

std::vector<CsvRow> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != csv_header())
        throw std::runtime_error("unrecognized CSV header in " + path);
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 13)
            throw std::runtime_error("bad CSV row in " + path);
        CsvRow r;
        r.algorithm = f[0];
        r.param = f[1];
        r.value = std::stod(f[2]);
        r.iteration = std::stoi(f[3]);
        r.total_messages = std::stoull(f[4]);
        r.marker_msgs = std::stoull(f[5]);
        r.normal_msgs = std::stoull(f[6]);
        r.collision_msgs = std::stoull(f[7]);
        r.initnet_msgs = std::stoull(f[8]);
        r.rounds = std::stoull(f[9]);
        r.collisions = std::stoull(f[10]);
        r.groups = std::stoull(f[11]);
        r.initnet_size = std::stoull(f[12]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<SummaryRow> summarize(const std::vector<CsvRow>& rows) {
    std::map<std::tuple<std::string, std::string, double>, SummaryRow> acc;
    for (const CsvRow& r : rows) {
        SummaryRow& s = acc[{r.algorithm, r.param, r.value}];
        s.algorithm = r.algorithm;
        s.param = r.param;
        s.value = r.value;
        s.iterations += 1;
        s.total_messages += static_cast<double>(r.total_messages);
        s.marker_msgs += static_cast<double>(r.marker_msgs);
        s.normal_msgs += static_cast<double>(r.normal_msgs);
        s.collision_msgs += static_cast<double>(r.collision_msgs);
        s.initnet_msgs += static_cast<double>(r.initnet_msgs);
        s.rounds += static_cast<double>(r.rounds);
        s.collisions += static_cast<double>(r.collisions);
        s.groups += static_cast<double>(r.groups);
        s.initnet_size += static_cast<double>(r.initnet_size);
    }
    std::vector<SummaryRow> out;
    for (auto& [key, s] : acc) {
        double k = s.iterations;
        s.total_messages /= k;
        s.marker_msgs /= k;
        s.normal_msgs /= k;
        s.collision_msgs /= k;
        s.initnet_msgs /= k;
        s.rounds /= k;
        s.collisions /= k;
        s.groups /= k;
        s.initnet_size /= k;
        out.push_back(s);
    }
    return out;
}

std::string summary_text(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "algorithm param value iters mean_msgs mean_rounds mean_collisions "
          "mean_groups mean_initnet\n";
    os.precision(3);
    os.setf(std::ios::fixed);
    for (const SummaryRow& s : rows) {
        os << s.algorithm << ' ' << s.param << ' ' << format_value(s.value)
           << ' ' << s.iterations << ' ' << s.total_messages << ' ' << s.rounds
           << ' ' << s.collisions << ' ' << s.groups << ' ' << s.initnet_size
           << '\n';
    }
    return os.str();
}

}  // namespace psnap
