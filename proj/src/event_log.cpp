#include "psnap/event_log.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace psnap {

using nlohmann::json;

void EventLog::send(const Envelope& e) {
    Event ev;
    ev.type = EventType::Send;
    ev.round = current_round;
    ev.node = e.from;
    ev.peer = e.to;
    ev.kind = e.kind;
    ev.forwarded = e.forwarded;
    ev.env_id = e.env_id;
    ev.msg_id = e.payload.msg_id;
    ev.instance = e.instance;
    if (!e.payload.ids.empty()) ev.ids = e.payload.ids;
    events.push_back(std::move(ev));
}

void EventLog::receive(const Envelope& e) {
    Event ev;
    ev.type = EventType::Receive;
    ev.round = current_round;
    ev.node = e.to;
    ev.peer = e.from;
    ev.kind = e.kind;
    ev.forwarded = e.forwarded;
    ev.env_id = e.env_id;
    ev.msg_id = e.payload.msg_id;
    ev.instance = e.instance;
    if (!e.payload.ids.empty()) ev.ids = e.payload.ids;
    events.push_back(std::move(ev));
}

void EventLog::checkpoint(NodeId node, InstanceId inst) {
    Event ev;
    ev.type = EventType::Checkpoint;
    ev.round = current_round;
    ev.node = node;
    ev.instance = inst;
    events.push_back(std::move(ev));
}

void EventLog::terminated(NodeId node, InstanceId inst,
                          std::shared_ptr<const CheckpointRecord> record) {
    Event ev;
    ev.type = EventType::Terminated;
    ev.round = current_round;
    ev.node = node;
    ev.instance = inst;
    ev.record = std::move(record);
    events.push_back(std::move(ev));
}

void EventLog::phase2_enter(NodeId node, InstanceId inst) {
    Event ev;
    ev.type = EventType::Phase2Enter;
    ev.round = current_round;
    ev.node = node;
    ev.instance = inst;
    events.push_back(std::move(ev));
}

void EventLog::phase2_exit(NodeId node, InstanceId inst) {
    Event ev;
    ev.type = EventType::Phase2Exit;
    ev.round = current_round;
    ev.node = node;
    ev.instance = inst;
    events.push_back(std::move(ev));
}

void EventLog::rollback_restored(NodeId node, std::uint64_t state,
                                 std::vector<InTransitMsg> links) {
    Event ev;
    ev.type = EventType::RollbackRestored;
    ev.round = current_round;
    ev.node = node;
    ev.restored_state = state;
    ev.restored_links = std::move(links);
    events.push_back(std::move(ev));
}

namespace {

constexpr const char* type_names[] = {
    "send", "recv", "checkpoint", "terminated",
    "phase2_enter", "phase2_exit", "rollback",
};

json instance_json(const InstanceId& i) {
    return json{{"initiator", i.initiator}, {"sequence", i.sequence}};
}

InstanceId instance_from(const json& j) {
    return InstanceId{j.at("initiator").get<NodeId>(), j.at("sequence").get<int>()};
}

json record_json(const CheckpointRecord& r) {
    json in_transit = json::array();
    for (const auto& m : r.in_transit)
        in_transit.push_back(json{{"sender", m.sender}, {"msg_id", m.msg_id}});
    return json{{"owner", r.owner},
                {"instance", instance_json(r.instance)},
                {"local_state", r.local_state},
                {"in_transit", std::move(in_transit)}};
}

CheckpointRecord record_from(const json& j) {
    CheckpointRecord r;
    r.owner = j.at("owner").get<NodeId>();
    r.instance = instance_from(j.at("instance"));
    r.local_state = j.at("local_state").get<std::uint64_t>();
    for (const auto& m : j.at("in_transit"))
        r.in_transit.push_back(
            {m.at("sender").get<NodeId>(), m.at("msg_id").get<std::uint64_t>()});
    return r;
}

}  // namespace

void EventLog::write_jsonl(std::ostream& out) const {
    for (const Event& ev : events) {
        json j;
        j["type"] = type_names[static_cast<int>(ev.type)];
        j["round"] = ev.round;
        j["node"] = ev.node;
        if (ev.type == EventType::Send || ev.type == EventType::Receive) {
            j["peer"] = ev.peer;
            j["kind"] = kind_name(ev.kind);
            j["env_id"] = ev.env_id;
            if (ev.forwarded) j["forwarded"] = true;
            if (ev.kind == Kind::App) j["msg_id"] = ev.msg_id;
            if (!ev.ids.empty()) j["ids"] = ev.ids;
        }
        if (ev.instance) j["instance"] = instance_json(*ev.instance);
        if (ev.record) j["record"] = record_json(*ev.record);
        if (ev.type == EventType::RollbackRestored) {
            j["restored_state"] = ev.restored_state;
            json links = json::array();
            for (const auto& m : ev.restored_links)
                links.push_back(json{{"sender", m.sender}, {"msg_id", m.msg_id}});
            j["restored_links"] = std::move(links);
        }
        out << j.dump() << '\n';
    }
}

std::string EventLog::to_jsonl() const {
    std::ostringstream out;
    write_jsonl(out);
    return out.str();
}

EventLog EventLog::read_jsonl(std::istream& in) {
    EventLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        Event ev;
        std::string type = j.at("type").get<std::string>();
        int ti = 0;
        for (; ti < 7; ++ti)
            if (type == type_names[ti]) break;
        if (ti == 7) throw std::runtime_error("unknown trace event type: " + type);
        ev.type = static_cast<EventType>(ti);
        ev.round = j.at("round").get<int>();
        ev.node = j.at("node").get<NodeId>();
        if (j.contains("peer")) ev.peer = j.at("peer").get<NodeId>();
        if (j.contains("kind")) {
            auto k = kind_from_name(j.at("kind").get<std::string>());
            if (!k) throw std::runtime_error("unknown message kind in trace");
            ev.kind = *k;
        }
        if (j.contains("env_id")) ev.env_id = j.at("env_id").get<std::uint64_t>();
        if (j.contains("forwarded")) ev.forwarded = j.at("forwarded").get<bool>();
        if (j.contains("msg_id")) ev.msg_id = j.at("msg_id").get<std::uint64_t>();
        if (j.contains("ids")) ev.ids = j.at("ids").get<std::vector<NodeId>>();
        if (j.contains("instance")) ev.instance = instance_from(j.at("instance"));
        if (j.contains("record"))
            ev.record = std::make_shared<CheckpointRecord>(record_from(j.at("record")));
        if (j.contains("restored_state"))
            ev.restored_state = j.at("restored_state").get<std::uint64_t>();
        if (j.contains("restored_links"))
            for (const auto& m : j.at("restored_links"))
                ev.restored_links.push_back(
                    {m.at("sender").get<NodeId>(), m.at("msg_id").get<std::uint64_t>()});
        log.events.push_back(std::move(ev));
        log.current_round = std::max(log.current_round, ev.round);
    }
    return log;
}

}  // namespace psnap
