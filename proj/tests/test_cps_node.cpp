#include <doctest.h>

#include <algorithm>

#include "psnap/checker.hpp"
#include "psnap/cps_node.hpp"
#include "psnap/sim.hpp"

using namespace psnap;

namespace {

Envelope env_of(NodeId from, NodeId to, Kind kind, InstanceId inst,
                Payload payload = {}) {
    Envelope e;
    e.from = from;
    e.to = to;
    e.kind = kind;
    e.instance = inst;
    e.payload = std::move(payload);
    return e;
}

Scenario line_scenario(int n, std::vector<int> initiators) {
    Scenario sc;
    sc.n = n;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    sc.topology = edges;
    sc.initiators = std::move(initiators);
    return sc;
}

int count_events(const EventLog& log, EventType t) {
    int k = 0;
    for (const Event& e : log.events) k += e.type == t;
    return k;
}

}  // namespace

TEST_CASE("an initiator floods markers to its dependency set and records") {
    EventLog log;
    CpsNode node(0, &log);
    node.set_initial_ds({1, 2});
    auto out = node.start_snapshot(1);
    REQUIRE(out.size() == 2);
    for (const Envelope& e : out) {
        CHECK(e.kind == Kind::Marker);
        CHECK(e.instance == InstanceId{0, 1});
    }
    CHECK(node.snapshot_active());
    CHECK(node.is_initiator());
    CHECK(count_events(log, EventType::Checkpoint) == 1);
    CHECK(node.dependency_set().empty());  // moved into the previous DS
}

TEST_CASE("a report for a dead instance is answered with a cancellation") {
    EventLog log;
    CpsNode node(3, &log);
    Payload p;
    p.ids = {1};
    auto out = node.deliver(env_of(4, 3, Kind::MyDS, InstanceId{3, 1}, p));
    REQUIRE(out.size() == 1);
    CHECK(out[0].kind == Kind::Out);
    CHECK(out[0].to == 4);
}

TEST_CASE("a virtual-link request to a non-initiator is denied") {
    EventLog log;
    CpsNode node(3, &log);
    Payload p;
    p.a = 9;
    p.b = 8;
    p.opp = InstanceId{3, 1};
    auto out = node.deliver(env_of(5, 3, Kind::Link, InstanceId{5, 1}, p));
    REQUIRE(out.size() == 1);
    CHECK(out[0].kind == Kind::Deny);
    CHECK(out[0].to == 5);
}

TEST_CASE("application sends emit a marker only for unseen destinations") {
    EventLog log;
    CpsNode node(0, &log);
    node.set_initial_ds({});
    // join an instance by receiving a marker first
    auto joined = node.deliver(env_of(7, 0, Kind::Marker, InstanceId{7, 1}));
    (void)joined;
    auto first = node.send_app(2, 100);
    REQUIRE(first.size() == 2);
    CHECK(first[0].kind == Kind::Marker);
    CHECK(first[1].kind == Kind::App);
    auto second = node.send_app(2, 101);
    REQUIRE(second.size() == 1);
    CHECK(second[0].kind == Kind::App);
}

TEST_CASE("an isolated initiator completes on its own") {
    Scenario sc;
    sc.n = 1;
    sc.topology = std::vector<std::pair<int, int>>{};
    sc.initiators = std::vector<int>{0};
    RunResult r = run(sc, Algorithm::Cps);
    CHECK(r.clean_completion);
    CHECK(!r.round_limit_exceeded);
    REQUIRE(r.checkpoints[0].has_value());
    CHECK(r.checkpoints[0]->in_transit.empty());
    CHECK(r.metrics.group_count == 1);
    CHECK(r.metrics.initnet_size == 0);
}

TEST_CASE("two colliding initiators merge and both terminate") {
    Scenario sc = line_scenario(2, {0, 1});
    RunResult r = run(sc, Algorithm::Cps);
    CHECK(r.clean_completion);
    CHECK(count_events(r.log, EventType::Terminated) == 2);
    CHECK(count_events(r.log, EventType::Phase2Enter) == 2);
    CHECK(count_events(r.log, EventType::Phase2Exit) == 2);
    CHECK(r.metrics.group_count == 2);
    CHECK(r.metrics.total_rounds <= 9);  // 3n+3 for n=2
    CHECK(check_all(r.log, sc.n).all_pass());
}

TEST_CASE("all-initiating line forms a line-shaped initiator network") {
    Scenario sc = line_scenario(4, {0, 1, 2, 3});
    RunResult r = run(sc, Algorithm::Cps);
    CHECK(r.clean_completion);
    CHECK(count_events(r.log, EventType::Terminated) == 4);
    CHECK(r.metrics.initnet_size == 3);
    CHECK(check_all(r.log, sc.n).all_pass());
}

TEST_CASE("all-initiating clique forms a clique initiator network") {
    Scenario sc;
    sc.n = 6;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) edges.emplace_back(i, j);
    sc.topology = edges;
    sc.initiators = std::vector<int>{0, 1, 2, 3, 4, 5};
    RunResult r = run(sc, Algorithm::Cps);
    CHECK(r.clean_completion);
    CHECK(r.metrics.group_count == 6);
    CHECK(r.metrics.initnet_size == 1);
    CHECK(check_all(r.log, sc.n).all_pass());
}

TEST_CASE("rollback restores recorded state and link contents") {
    Scenario sc = line_scenario(3, {0});
    sc.workload = standard_workload();
    sc.seed = 11;
    RunOptions opt;
    opt.rollback = true;
    opt.rollback_initiator = 0;
    RunResult r = run(sc, Algorithm::Cps, opt);
    CHECK(r.clean_completion);
    int restored = count_events(r.log, EventType::RollbackRestored);
    CHECK(restored == count_events(r.log, EventType::Checkpoint));
    CHECK(restored >= 1);
    Verdict v = check_rollback(r.log);
    INFO(v.detail);
    CHECK(v.pass);
    for (int i = 0; i < sc.n; ++i) {
        if (r.checkpoints[i])
            CHECK(r.final_app_states[i] == r.checkpoints[i]->local_state);
    }
}

TEST_CASE("snapshots under load keep the recorded cut consistent") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Scenario sc;
        sc.n = 12;
        sc.comm_prob = 0.25;
        sc.init_prob = 0.25;
        sc.seed = seed;
        sc.workload = standard_workload();
        RunResult r = run(sc, Algorithm::Cps);
        REQUIRE(r.clean_completion);
        REQUIRE(!r.round_limit_exceeded);
        VerdictReport report = check_all(r.log, sc.n);
        for (const Verdict& v : report.checks) {
            INFO(v.name << " seed " << seed << ": " << v.detail);
            CHECK(v.pass);
        }
    }
}
