#pragma once

#include <deque>
#include <map>

#include "psnap/node.hpp"

namespace psnap {

/// One node running the centralized-merge baseline: colliding snapshot groups
/// are merged under a single main-initiator, demoting the other initiator to a
/// sub-initiator that forwards algorithm messages up the main/sub tree. The
/// main handles one collision at a time and queues the rest.
class CssNode : public NodeBase {
public:
    CssNode(NodeId id, EventLog* log) : NodeBase(id, log) {}

    std::vector<Envelope> deliver(const Envelope& env) override;
    std::vector<Envelope> start_snapshot(int sequence) override;
    std::vector<Envelope> send_app(NodeId dest, std::uint64_t msg_id) override;

    bool snapshot_active() const override { return instance_.has_value(); }
    bool initiated() const { return initiated_; }
    bool is_main() const { return is_main_; }
    NodeId parent() const { return parent_; }

private:
    void handle(const Envelope& env);
    void emit(Envelope env);
    Envelope make(NodeId to, Kind kind, Payload payload,
                  std::optional<InstanceId> inst) const;
    void forward_up(const Envelope& env);

    // member-level operations (mirror phase 1)
    void join(InstanceId inst, NodeId first_marker_from);
    void on_marker(NodeId from, InstanceId inst);
    void on_out(InstanceId inst);
    void on_fin(const std::vector<NodeId>& list, InstanceId inst);
    void on_accept(const Envelope& env);
    void check_termination();
    void terminate_instance();
    void reprocess_markers();

    // main-initiator operations
    void on_dsinfo(const Envelope& env);
    void on_newinit(const Envelope& env);
    void on_combine(const Envelope& env);
    void on_compinit(const Envelope& env);
    void on_initinfo(const Envelope& env);
    void accept_next_collision();
    void resign_to(NodeId winner, MergeReason reason, std::uint64_t token);
    void absorb_merge(const CssMergeInfo& info);
    void try_determine();
    std::uint64_t make_token();
    void decline_token(std::uint64_t token, InstanceId inst);

    std::vector<Envelope> out_;

    // member state
    std::optional<InstanceId> instance_;
    bool fin_ = false;
    std::set<NodeId> pds_;
    std::set<NodeId> rcv_mk_;
    std::set<NodeId> mk_list_;
    bool mk_list_assigned_ = false;
    std::vector<std::pair<NodeId, std::uint64_t>> msg_q_;
    std::vector<std::pair<NodeId, InstanceId>> collided_;
    std::optional<CheckpointRecord> pending_checkpoint_;
    NodeId route_ = -1;  // where algorithm messages for this node's group go

    // initiator state
    bool initiated_ = false;
    bool is_main_ = false;
    bool group_determined_ = false;  // set when this node (as main) sent Fin
    NodeId parent_ = -1;             // current main/sub tree parent, -1 at a main
    std::set<NodeId> domain_;        // initiator ids merged under this main
    std::set<InstanceId> instances_; // instances merged under this main
    std::set<NodeId> mk_from_;
    std::set<NodeId> mk_to_;
    std::map<NodeId, std::set<NodeId>> ds_info_;
    std::map<NodeId, InstanceId> member_instance_;
    std::deque<PendingCollision> pending_;
    // one token per unresolved collision this root is a party to; each token
    // is created when a side enters a collision, travels with the resolution
    // messages, ships to the new main on resignation and is erased exactly
    // once when the collision is resolved. Determination is blocked while any
    // token is open.
    std::set<std::uint64_t> open_;
    int token_seq_ = 0;
};

}  // namespace psnap
