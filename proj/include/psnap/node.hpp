#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "psnap/event_log.hpp"
#include "psnap/protocol.hpp"

namespace psnap {

/// Deterministic fold used to evolve the opaque application state.
std::uint64_t mix_state(std::uint64_t state, std::uint64_t a, std::uint64_t b,
                        std::uint64_t c);

/// Common node interface driven by the round scheduler. Handlers return the
/// envelopes to enqueue; envelopes whose `from` field differs from this node's
/// id are link re-injections performed during rollback.
class NodeBase {
public:
    NodeBase(NodeId id, EventLog* log) : id_(id), log_(log) {}
    virtual ~NodeBase() = default;

    virtual std::vector<Envelope> deliver(const Envelope& env) = 0;
    virtual std::vector<Envelope> start_snapshot(int sequence) = 0;
    virtual std::vector<Envelope> send_app(NodeId dest, std::uint64_t msg_id) = 0;
    virtual std::vector<Envelope> start_rollback(int sequence) { return {}; }

    virtual bool snapshot_active() const = 0;
    virtual bool app_paused() const { return false; }

    NodeId id() const { return id_; }
    std::uint64_t app_state() const { return app_state_; }
    const std::set<NodeId>& dependency_set() const { return ds_; }
    void set_initial_ds(std::set<NodeId> ds) { ds_ = std::move(ds); }
    const std::optional<CheckpointRecord>& latest_checkpoint() const {
        return latest_checkpoint_;
    }

protected:
    void app_sent(NodeId dest, std::uint64_t msg_id) {
        ds_.insert(dest);
        app_state_ = mix_state(app_state_, 1, static_cast<std::uint64_t>(dest), msg_id);
    }
    void app_received(NodeId sender, std::uint64_t msg_id) {
        ds_.insert(sender);
        app_state_ = mix_state(app_state_, 2, static_cast<std::uint64_t>(sender), msg_id);
    }

    NodeId id_;
    EventLog* log_;
    std::set<NodeId> ds_;  // nodes communicated with since the last recording
    std::uint64_t app_state_ = 0;
    std::optional<CheckpointRecord> latest_checkpoint_;
};

}  // namespace psnap
