#include <doctest.h>

#include <set>

#include "psnap/checker.hpp"
#include "psnap/sim.hpp"

using namespace psnap;

namespace {

int count_events(const EventLog& log, EventType t) {
    int k = 0;
    for (const Event& e : log.events) k += e.type == t;
    return k;
}

std::set<NodeId> joined_nodes(const EventLog& log) {
    std::set<NodeId> s;
    for (const Event& e : log.events)
        if (e.type == EventType::Checkpoint) s.insert(e.node);
    return s;
}

}  // namespace

TEST_CASE("two colliding initiators merge under the smaller id") {
    Scenario sc;
    sc.n = 2;
    sc.topology = std::vector<std::pair<int, int>>{{0, 1}};
    sc.initiators = std::vector<int>{0, 1};
    RunResult r = run(sc, Algorithm::Css);
    CHECK(r.clean_completion);
    CHECK(count_events(r.log, EventType::Terminated) == 2);
    CHECK(r.metrics.group_count == 2);
    CHECK(r.css_parent[0] == -1);
    CHECK(r.css_parent[1] == 0);
    CHECK(r.metrics.initnet_size == 1);
}

TEST_CASE("the main/sub relation stays a forest rooted at mains") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Scenario sc;
        sc.n = 30;
        sc.comm_prob = 0.15;
        sc.init_prob = 0.25;
        sc.seed = seed;
        RunResult r = run(sc, Algorithm::Css);
        REQUIRE(r.clean_completion);
        for (int i = 0; i < sc.n; ++i) {
            int hops = 0;
            for (int cur = i; r.css_parent[cur] != -1; cur = r.css_parent[cur]) {
                REQUIRE(r.initiated[cur]);
                REQUIRE(++hops <= sc.n);
            }
        }
    }
}

TEST_CASE("both algorithms agree on groups and membership per scenario") {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        Scenario sc;
        sc.n = 25;
        sc.comm_prob = 0.15;
        sc.init_prob = 0.2;
        sc.seed = seed;
        RunResult cps = run(sc, Algorithm::Cps);
        RunResult css = run(sc, Algorithm::Css);
        REQUIRE(cps.clean_completion);
        REQUIRE(css.clean_completion);
        CHECK(cps.metrics.group_count == css.metrics.group_count);
        CHECK(joined_nodes(cps.log) == joined_nodes(css.log));
    }
}

TEST_CASE("baseline snapshots under load pass the cut-consistency checks") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Scenario sc;
        sc.n = 12;
        sc.comm_prob = 0.25;
        sc.init_prob = 0.25;
        sc.seed = seed;
        sc.workload = standard_workload();
        RunResult r = run(sc, Algorithm::Css);
        REQUIRE(r.clean_completion);
        REQUIRE(!r.round_limit_exceeded);
        Verdict wf = validate_log(r.log);
        Verdict cc = check_checkpoint_concurrency(r.log, sc.n);
        Verdict it = check_in_transit(r.log, sc.n);
        Verdict orph = check_orphans(r.log, sc.n);
        for (const Verdict* v : {&wf, &cc, &it, &orph}) {
            INFO(v->name << " seed " << seed << ": " << v->detail);
            CHECK(v->pass);
        }
    }
}

TEST_CASE("collision handling is serialized through the main") {
    // with many simultaneous initiators the baseline needs far more rounds
    Scenario sc;
    sc.n = 40;
    sc.comm_prob = 0.3;
    sc.init_prob = 0.5;
    sc.seed = 3;
    RunResult cps = run(sc, Algorithm::Cps);
    RunResult css = run(sc, Algorithm::Css);
    REQUIRE(cps.clean_completion);
    REQUIRE(css.clean_completion);
    CHECK(css.metrics.total_rounds > 5 * cps.metrics.total_rounds);
}
