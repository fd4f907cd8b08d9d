#include <doctest.h>

#include <map>
#include <tuple>

#include "psnap/sim.hpp"

using namespace psnap;

TEST_CASE("relation generation respects the edge probability") {
    std::mt19937_64 rng(1);
    CHECK(generate_relation(50, 0.0, rng).empty());
    rng.seed(1);
    CHECK(generate_relation(50, 1.0, rng).size() == 50 * 49 / 2);
    rng.seed(123);
    // n=100, C=0.1: 4950 candidate pairs, expectation 495, sigma ~21
    auto edges = generate_relation(100, 0.1, rng);
    CHECK(edges.size() > 495 - 3 * 22);
    CHECK(edges.size() < 495 + 3 * 22);
    for (auto [a, b] : edges) CHECK(a < b);
}

TEST_CASE("initiator sampling respects the probability") {
    std::mt19937_64 rng(7);
    CHECK(pick_initiators(40, 0.0, rng).empty());
    rng.seed(7);
    CHECK(pick_initiators(40, 1.0, rng).size() == 40);
}

TEST_CASE("scenario JSON round-trips") {
    Scenario sc;
    sc.n = 8;
    sc.comm_prob = 0.25;
    sc.init_prob = 0.5;
    sc.seed = 42;
    sc.workload = standard_workload();
    sc.topology = std::vector<std::pair<int, int>>{{0, 1}, {1, 2}};
    sc.initiators = std::vector<int>{0, 2};
    Scenario back = Scenario::from_json(sc.to_json());
    CHECK(back.n == sc.n);
    CHECK(back.comm_prob == sc.comm_prob);
    CHECK(back.seed == sc.seed);
    CHECK(back.workload.enabled);
    CHECK(back.workload.send_prob == sc.workload.send_prob);
    CHECK(back.topology == sc.topology);
    CHECK(back.initiators == sc.initiators);
}

TEST_CASE("identical seeds give byte-identical traces and metrics") {
    Scenario sc;
    sc.n = 20;
    sc.comm_prob = 0.15;
    sc.init_prob = 0.2;
    sc.seed = 5;
    sc.workload = standard_workload();
    for (Algorithm alg : {Algorithm::Cps, Algorithm::Css}) {
        RunResult a = run(sc, alg);
        RunResult b = run(sc, alg);
        CHECK(a.log.to_jsonl() == b.log.to_jsonl());
        CHECK(a.metrics.total_messages == b.metrics.total_messages);
        CHECK(a.metrics.total_rounds == b.metrics.total_rounds);
    }
}

TEST_CASE("the application schedule does not depend on the algorithm") {
    Scenario sc;
    sc.n = 15;
    sc.comm_prob = 0.2;
    sc.init_prob = 0.2;
    sc.seed = 9;
    sc.workload = standard_workload();
    using SendKey = std::tuple<int, NodeId, NodeId, std::uint64_t>;
    std::map<Algorithm, std::vector<SendKey>> sends;
    for (Algorithm alg : {Algorithm::Cps, Algorithm::Css}) {
        RunResult r = run(sc, alg);
        for (const Event& e : r.log.events)
            if (e.type == EventType::Send && e.kind == Kind::App)
                sends[alg].emplace_back(e.round, e.node, e.peer, e.msg_id);
    }
    CHECK(sends[Algorithm::Cps] == sends[Algorithm::Css]);
}

TEST_CASE("category counts add up to the total") {
    Scenario sc;
    sc.n = 25;
    sc.comm_prob = 0.15;
    sc.init_prob = 0.2;
    sc.seed = 2;
    for (Algorithm alg : {Algorithm::Cps, Algorithm::Css}) {
        RunResult r = run(sc, alg);
        const RunMetrics& m = r.metrics;
        CHECK(m.marker_msgs + m.normal_msgs + m.collision_msgs +
                  m.initnet_msgs + m.app_msgs ==
              m.total_messages);
        long processed = 0;
        for (long c : m.per_node_processed) processed += c;
        CHECK(processed == m.total_messages);
    }
}

TEST_CASE("a tiny round cap reports an aborted run") {
    Scenario sc;
    sc.n = 20;
    sc.comm_prob = 0.2;
    sc.init_prob = 0.3;
    sc.seed = 1;
    RunOptions opt;
    opt.round_cap = 3;
    RunResult r = run(sc, Algorithm::Cps, opt);
    CHECK(r.round_limit_exceeded);
}

TEST_CASE("top-k load sums the busiest nodes' share") {
    RunMetrics m;
    m.total_messages = 10;
    m.per_node_processed = {1, 5, 3, 1};
    CHECK(top_k_load(m, 2) == doctest::Approx(0.8));
    CHECK(top_k_load(m, 10) == doctest::Approx(1.0));
}
