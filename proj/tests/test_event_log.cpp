#include <doctest.h>

#include <sstream>

#include "psnap/event_log.hpp"

using namespace psnap;

namespace {

EventLog sample_log() {
    EventLog log;
    log.current_round = 1;
    Envelope e;
    e.from = 0;
    e.to = 1;
    e.kind = Kind::Marker;
    e.instance = InstanceId{0, 1};
    e.payload.a = 0;
    e.env_id = 7;
    log.send(e);
    log.current_round = 2;
    log.receive(e);
    log.checkpoint(1, InstanceId{0, 1});
    auto record = std::make_shared<CheckpointRecord>();
    record->owner = 1;
    record->instance = InstanceId{0, 1};
    record->local_state = 42;
    record->in_transit.push_back({0, 9});
    log.current_round = 4;
    log.terminated(1, InstanceId{0, 1},
                   std::shared_ptr<const CheckpointRecord>(record));
    log.phase2_enter(0, InstanceId{0, 1});
    log.phase2_exit(0, InstanceId{0, 1});
    log.rollback_restored(1, 42, {{0, 9}});
    return log;
}

}  // namespace

TEST_CASE("trace serialization round-trips every event type") {
    EventLog log = sample_log();
    std::string text = log.to_jsonl();
    std::istringstream in(text);
    EventLog back = EventLog::read_jsonl(in);
    REQUIRE(back.events.size() == log.events.size());
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const Event& a = log.events[i];
        const Event& b = back.events[i];
        CHECK(a.type == b.type);
        CHECK(a.round == b.round);
        CHECK(a.node == b.node);
        CHECK(a.peer == b.peer);
        CHECK(a.kind == b.kind);
        CHECK(a.env_id == b.env_id);
        CHECK(a.instance == b.instance);
    }
    const Event& term = back.events[3];
    REQUIRE(term.record != nullptr);
    CHECK(term.record->local_state == 42);
    REQUIRE(term.record->in_transit.size() == 1);
    CHECK(term.record->in_transit[0].msg_id == 9);
    const Event& rb = back.events.back();
    CHECK(rb.restored_state == 42);
    CHECK(rb.restored_links == std::vector<InTransitMsg>{{0, 9}});
}

TEST_CASE("serialization is byte-stable") {
    CHECK(sample_log().to_jsonl() == sample_log().to_jsonl());
}

TEST_CASE("id-list payloads appear on send and receive entries") {
    EventLog log;
    Envelope e;
    e.from = 2;
    e.to = 5;
    e.kind = Kind::MyDS;
    e.instance = InstanceId{5, 1};
    e.payload.ids = {1, 3};
    log.send(e);
    log.receive(e);
    CHECK(log.events[0].ids == std::vector<NodeId>{1, 3});
    CHECK(log.events[1].ids == std::vector<NodeId>{1, 3});
}
