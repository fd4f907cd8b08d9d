#include <doctest.h>

#include <cstdio>

#include "psnap/experiments.hpp"

using namespace psnap;

TEST_CASE("the CSV header is pinned") {
    CHECK(csv_header() ==
          "algorithm,param,value,iteration,total_messages,marker_msgs,"
          "normal_msgs,collision_msgs,initnet_msgs,rounds,collisions,"
          "groups,initnet_size");
}

TEST_CASE("point runs are deterministic and thread-count independent") {
    PointSpec spec;
    spec.param = "N";
    spec.value = 12;
    spec.n = 12;
    spec.comm_prob = 0.25;
    spec.init_prob = 0.25;
    spec.iterations = 6;
    spec.seed_base = 100;
    spec.workload = true;
    spec.algorithms = {Algorithm::Cps, Algorithm::Css};

    std::string serial = to_csv(run_point(spec, 1));
    std::string threaded = to_csv(run_point(spec, 4));
    std::string repeat = to_csv(run_point(spec, 4));
    CHECK(serial == threaded);
    CHECK(threaded == repeat);
}

TEST_CASE("rows come out algorithm-major, iteration-minor") {
    PointSpec spec;
    spec.param = "C";
    spec.value = 0.3;
    spec.n = 8;
    spec.comm_prob = 0.3;
    spec.init_prob = 0.5;
    spec.iterations = 3;
    spec.algorithms = {Algorithm::Cps, Algorithm::Css};
    auto rows = run_point(spec, 2);
    REQUIRE(rows.size() == 6);
    for (int i = 0; i < 3; ++i) {
        CHECK(rows[i].algorithm == "cps");
        CHECK(rows[i].iteration == i);
        CHECK(rows[3 + i].algorithm == "css");
        CHECK(rows[3 + i].iteration == i);
        CHECK(rows[i].param == "C");
        CHECK(rows[i].value == doctest::Approx(0.3));
    }
}

TEST_CASE("CSV files round-trip through read_csv") {
    PointSpec spec;
    spec.param = "F";
    spec.value = 0.5;
    spec.n = 10;
    spec.comm_prob = 0.3;
    spec.init_prob = 0.5;
    spec.iterations = 2;
    spec.algorithms = {Algorithm::Cps};
    auto rows = run_point(spec, 1);
    const std::string path = "test_experiments_roundtrip.csv";
    write_csv(path, rows);
    auto back = read_csv(path);
    std::remove(path.c_str());
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].algorithm == rows[i].algorithm);
        CHECK(back[i].iteration == rows[i].iteration);
        CHECK(back[i].total_messages == rows[i].total_messages);
        CHECK(back[i].rounds == rows[i].rounds);
        CHECK(back[i].groups == rows[i].groups);
        CHECK(back[i].initnet_size == rows[i].initnet_size);
    }
}

TEST_CASE("summaries average each metric per algorithm") {
    std::vector<CsvRow> rows(4);
    for (int i = 0; i < 4; ++i) {
        rows[i].algorithm = i < 2 ? "cps" : "css";
        rows[i].param = "N";
        rows[i].value = 50;
        rows[i].iteration = i % 2;
        rows[i].total_messages = 100 + i;
        rows[i].rounds = 10 * (i + 1);
    }
    auto sums = summarize(rows);
    REQUIRE(sums.size() == 2);
    CHECK(sums[0].algorithm == "cps");
    CHECK(sums[0].iterations == 2);
    CHECK(sums[0].total_messages == doctest::Approx(100.5));
    CHECK(sums[0].rounds == doctest::Approx(15.0));
    CHECK(sums[1].algorithm == "css");
    CHECK(sums[1].total_messages == doctest::Approx(102.5));
    CHECK(sums[1].rounds == doctest::Approx(35.0));
    CHECK(summary_text(sums).find("cps") != std::string::npos);
}

TEST_CASE("sweep configs parse from JSON") {
    SweepConfig c = SweepConfig::from_json_text(R"({
        "param": "C",
        "values": [0.05, 0.1, 0.2],
        "n": 40,
        "init_prob": 0.1,
        "iterations": 7,
        "seed_base": 42,
        "workload": true,
        "algorithm": "cps"
    })");
    CHECK(c.param == "C");
    CHECK(c.values == std::vector<double>{0.05, 0.1, 0.2});
    CHECK(c.n == 40);
    CHECK(c.init_prob == doctest::Approx(0.1));
    CHECK(c.iterations == 7);
    CHECK(c.seed_base == 42);
    CHECK(c.workload);
    REQUIRE(c.algorithms.size() == 1);
    CHECK(c.algorithms[0] == Algorithm::Cps);
    CHECK_THROWS(SweepConfig::from_json_text("{\"param\": \"X\"}"));
}

TEST_CASE("a sweep concatenates the per-point row blocks in value order") {
    SweepConfig c;
    c.param = "N";
    c.values = {6, 10};
    c.comm_prob = 0.3;
    c.init_prob = 0.5;
    c.iterations = 2;
    c.algorithms = {Algorithm::Cps};
    auto rows = run_sweep(c, 2);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].value == doctest::Approx(6));
    CHECK(rows[1].value == doctest::Approx(6));
    CHECK(rows[2].value == doctest::Approx(10));
    CHECK(rows[3].value == doctest::Approx(10));
}
