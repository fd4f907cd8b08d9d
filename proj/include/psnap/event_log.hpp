#pragma once

#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "psnap/protocol.hpp"

namespace psnap {

enum class EventType {
    Send,
    Receive,
    Checkpoint,
    Terminated,
    Phase2Enter,
    Phase2Exit,
    RollbackRestored,
};

/// One entry of the simulation trace. Which fields are meaningful depends on
/// the type: Send/Receive describe an envelope, Checkpoint marks a recording,
/// Terminated carries the committed record, RollbackRestored carries the state
/// and link contents captured right after restoration.
struct Event {
    EventType type = EventType::Send;
    int round = 0;
    NodeId node = -1;  // acting node (sender for Send, receiver for Receive)
    NodeId peer = -1;
    Kind kind = Kind::App;
    bool forwarded = false;
    std::uint64_t env_id = 0;
    std::uint64_t msg_id = 0;
    std::optional<InstanceId> instance;
    std::vector<NodeId> ids;  // id-list payloads (wait lists, reported sets)
    std::shared_ptr<const CheckpointRecord> record;
    std::uint64_t restored_state = 0;
    std::vector<InTransitMsg> restored_links;
};

class EventLog {
public:
    int current_round = 0;
    std::vector<Event> events;

    void send(const Envelope& e);
    void receive(const Envelope& e);
    void checkpoint(NodeId node, InstanceId inst);
    void terminated(NodeId node, InstanceId inst,
                    std::shared_ptr<const CheckpointRecord> record);
    void phase2_enter(NodeId node, InstanceId inst);
    void phase2_exit(NodeId node, InstanceId inst);
    void rollback_restored(NodeId node, std::uint64_t state,
                           std::vector<InTransitMsg> links);

    void write_jsonl(std::ostream& out) const;
    std::string to_jsonl() const;
    static EventLog read_jsonl(std::istream& in);
};

}  // namespace psnap
