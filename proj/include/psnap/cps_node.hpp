#pragma once

#include <deque>
#include <map>
#include <tuple>

#include "psnap/node.hpp"

namespace psnap {

/// One node running the concurrent partial snapshot protocol: marker flooding
/// with collision handling over virtual links (phase 1), then distributed
/// termination detection on the resulting initiator network (phase 2), plus
/// the matching checkpoint rollback procedure.
class CpsNode : public NodeBase {
public:
    CpsNode(NodeId id, EventLog* log) : NodeBase(id, log) {}

    std::vector<Envelope> deliver(const Envelope& env) override;
    std::vector<Envelope> start_snapshot(int sequence) override;
    std::vector<Envelope> send_app(NodeId dest, std::uint64_t msg_id) override;
    std::vector<Envelope> start_rollback(int sequence) override;

    bool snapshot_active() const override { return instance_.has_value(); }
    bool app_paused() const override { return app_paused_; }
    bool rollback_active() const { return rb_instance_.has_value(); }
    bool is_initiator() const {
        return instance_ && instance_->initiator == id_;
    }
    const std::set<NodeId>& neighbours() const { return nbrs_; }

private:
    // ---- phase 1 ----
    void handle(const Envelope& env);
    void emit(Envelope env);  // self-addressed envelopes are handled locally
    Envelope make(NodeId to, Kind kind, Payload payload,
                  std::optional<InstanceId> inst) const;

    void on_marker(NodeId from, InstanceId inst);
    void on_myds(NodeId from, const std::vector<NodeId>& ds, InstanceId inst);
    void on_out(InstanceId inst);
    void on_fin(const std::vector<NodeId>& list, InstanceId inst);
    void on_newinit(NodeId detector, NodeId marker_sender, InstanceId opp,
                    InstanceId inst);
    void on_link(NodeId from, NodeId detector, NodeId marker_sender,
                 InstanceId target, InstanceId requester);
    void on_ack(NodeId from, InstanceId echo);
    void on_deny(NodeId from, NodeId detector, NodeId marker_sender,
                 InstanceId echo);
    void on_accept(NodeId marker_sender, InstanceId opp, InstanceId inst);

    void join(InstanceId inst, NodeId first_marker_from);
    void accept_collided_nodes(NodeId linked);
    void maybe_convergecast();
    void can_determine_sg();
    void check_termination();
    void terminate_instance();
    void reprocess_markers();

    // ---- phase 2 ----
    void start_phase2();
    void finish_phase2();
    void on_check(NodeId from, NodeId root, int dist, NodeId parent);
    void on_localterm(NodeId from);
    void on_globalterm();
    void phase2_message(const Envelope& env);

    // ---- rollback ----
    void on_rbmarker(NodeId from, InstanceId inst);
    void on_rbmyds(NodeId from, const std::vector<NodeId>& ds, InstanceId inst);
    void on_rbout(InstanceId inst);
    void on_rbfin(const std::vector<NodeId>& list, InstanceId inst);
    void check_rb_termination();

    std::vector<Envelope> out_;

    // phase 1 state
    std::optional<InstanceId> instance_;
    bool fin_ = false;
    std::set<NodeId> pds_;
    std::set<NodeId> rcv_mk_;
    std::set<NodeId> mk_list_;
    bool mk_list_assigned_ = false;
    std::vector<std::pair<NodeId, std::uint64_t>> msg_q_;
    std::vector<std::pair<NodeId, InstanceId>> collided_;
    std::optional<CheckpointRecord> pending_checkpoint_;
    // instances this node finished (terminated or was excluded from); late
    // markers for them are stale and must not restart participation
    std::set<InstanceId> done_;

    // initiator state
    std::set<NodeId> mk_from_;
    std::set<NodeId> members_;  // nodes whose MyDS we received (Fin targets)
    std::set<NodeId> mk_to_;
    std::map<NodeId, std::set<NodeId>> ds_info_;
    // (detector, marker sender, opponent initiator) -> opponent instance
    std::map<std::tuple<NodeId, NodeId, NodeId>, InstanceId> wait_;
    std::set<NodeId> nbrs_;
    // (opponent initiator, detector) pairs already relayed; repeat links for
    // the same pair are no-ops at the receiver, so they are never sent
    std::set<std::pair<NodeId, NodeId>> link_sent_;

    // phase 2 state
    bool in_phase2_ = false;
    bool phase2_done_ = false;
    NodeId root_ = -1;
    int dist_ = 0;
    NodeId parent_ = -1;
    std::set<NodeId> child_, lt_, ck_;
    std::map<NodeId, NodeId> ck_rid_;  // last root advertised by each neighbour
    bool lt_sent_ = false;
    std::vector<Envelope> phase2_pending_;

    // rollback state
    std::optional<InstanceId> rb_instance_;
    bool rb_fin_ = false;
    std::set<NodeId> rb_rcv_mk_;
    std::set<NodeId> rb_mk_list_;
    bool rb_mk_list_assigned_ = false;
    std::set<NodeId> rb_mk_from_;
    std::set<NodeId> rb_mk_to_;
    std::map<NodeId, std::set<NodeId>> rb_ds_info_;
    bool app_paused_ = false;
};

}  // namespace psnap
