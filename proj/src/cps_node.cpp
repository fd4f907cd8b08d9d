#include "psnap/cps_node.hpp"

#include <algorithm>

namespace psnap {

namespace {

bool is_subset(const std::set<NodeId>& sub, const std::set<NodeId>& super) {
    return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

}  // namespace

std::uint64_t mix_state(std::uint64_t state, std::uint64_t a, std::uint64_t b,
                        std::uint64_t c) {
    std::uint64_t z = state ^ (a * 0x9e3779b97f4a7c15ull) ^
                      (b * 0xbf58476d1ce4e5b9ull) ^ (c * 0x94d049bb133111ebull);
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Envelope CpsNode::make(NodeId to, Kind kind, Payload payload,
                       std::optional<InstanceId> inst) const {
    Envelope e;
    e.from = id_;
    e.to = to;
    e.instance = inst;
    e.kind = kind;
    e.payload = std::move(payload);
    return e;
}

void CpsNode::emit(Envelope env) {
    if (env.to == id_ && env.from == id_) {
        handle(env);  // self-addressed control messages are local
    } else {
        out_.push_back(std::move(env));
    }
}

std::vector<Envelope> CpsNode::deliver(const Envelope& env) {
    out_.clear();
    handle(env);
    return std::move(out_);
}

std::vector<Envelope> CpsNode::start_snapshot(int sequence) {
    out_.clear();
    if (instance_) return {};
    on_marker(id_, InstanceId{id_, sequence});
    return std::move(out_);
}

std::vector<Envelope> CpsNode::send_app(NodeId dest, std::uint64_t msg_id) {
    out_.clear();
    if (instance_ && !pds_.count(dest) && !ds_.count(dest) && !in_phase2_) {
        Payload p;
        p.a = instance_->initiator;
        emit(make(dest, Kind::Marker, std::move(p), *instance_));
    }
    app_sent(dest, msg_id);
    Payload p;
    p.msg_id = msg_id;
    emit(make(dest, Kind::App, std::move(p), std::nullopt));
    return std::move(out_);
}

std::vector<Envelope> CpsNode::start_rollback(int sequence) {
    out_.clear();
    if (rb_instance_) return {};
    on_rbmarker(id_, InstanceId{id_, sequence});
    return std::move(out_);
}

void CpsNode::handle(const Envelope& env) {
    const Payload& p = env.payload;
    switch (env.kind) {
        case Kind::App:
            app_received(env.from, p.msg_id);
            if (instance_ && !rcv_mk_.count(env.from))
                msg_q_.emplace_back(env.from, p.msg_id);
            break;
        case Kind::Marker:
            on_marker(env.from, *env.instance);
            break;
        case Kind::MyDS:
            on_myds(env.from, p.ids, *env.instance);
            break;
        case Kind::Out:
            on_out(*env.instance);
            break;
        case Kind::Fin:
            on_fin(p.ids, *env.instance);
            break;
        case Kind::NewInit:
            on_newinit(env.from, p.a, p.opp, *env.instance);
            break;
        case Kind::Link:
            on_link(env.from, p.a, p.b, p.opp, *env.instance);
            break;
        case Kind::Ack:
            on_ack(env.from, p.opp);
            break;
        case Kind::Deny:
            on_deny(env.from, p.a, p.b, p.opp);
            break;
        case Kind::Accept:
            on_accept(p.a, p.opp, *env.instance);
            break;
        case Kind::Check:
        case Kind::LocalTerm:
        case Kind::GlobalTerm:
            phase2_message(env);
            break;
        case Kind::RbMarker:
            on_rbmarker(env.from, *env.instance);
            break;
        case Kind::RbMyDS:
            on_rbmyds(env.from, p.ids, *env.instance);
            break;
        case Kind::RbOut:
            on_rbout(*env.instance);
            break;
        case Kind::RbFin:
            on_rbfin(p.ids, *env.instance);
            break;
        default:
            break;  // CSS kinds are never routed here
    }
}

// ---------------------------------------------------------------- phase 1

void CpsNode::join(InstanceId inst, NodeId first_marker_from) {
    instance_ = inst;
    fin_ = false;
    rcv_mk_.clear();
    rcv_mk_.insert(first_marker_from);
    pds_ = ds_;
    ds_.clear();
    mk_list_.clear();
    mk_list_assigned_ = false;
    msg_q_.clear();
    mk_from_.clear();
    members_.clear();
    mk_to_.clear();
    ds_info_.clear();
    wait_.clear();
    link_sent_.clear();
    nbrs_.clear();
    in_phase2_ = false;
    phase2_done_ = false;
    child_.clear();
    lt_.clear();
    ck_.clear();
    ck_rid_.clear();
    lt_sent_ = false;
    phase2_pending_.clear();

    pending_checkpoint_ = CheckpointRecord{id_, inst, app_state_, {}};
    log_->checkpoint(id_, inst);

    Payload myds;
    myds.ids.assign(pds_.begin(), pds_.end());
    emit(make(inst.initiator, Kind::MyDS, std::move(myds), inst));
    for (NodeId k : pds_) {
        Payload m;
        m.a = inst.initiator;
        emit(make(k, Kind::Marker, std::move(m), inst));
    }
}

void CpsNode::on_marker(NodeId from, InstanceId inst) {
    if (done_.count(inst)) return;
    if (!instance_) {
        join(inst, from);
    } else if (*instance_ == inst) {
        rcv_mk_.insert(from);
        if (fin_) check_termination();
    } else {
        // collision: a different group's marker reached this node
        rcv_mk_.insert(from);
        auto entry = std::make_pair(from, inst);
        if (std::find(collided_.begin(), collided_.end(), entry) == collided_.end())
            collided_.push_back(entry);
        if (!fin_) {
            Payload p;
            p.a = from;       // the node whose marker collided
            p.b = id_;        // detector
            p.opp = inst;
            emit(make(instance_->initiator, Kind::NewInit, std::move(p), *instance_));
        }
    }
}

void CpsNode::on_myds(NodeId from, const std::vector<NodeId>& ds, InstanceId inst) {
    if (!instance_ || *instance_ != inst || instance_->initiator != id_ || fin_) {
        emit(make(from, Kind::Out, {}, inst));
        return;
    }
    mk_from_.insert(from);
    members_.insert(from);
    mk_to_.insert(ds.begin(), ds.end());
    ds_info_[from].insert(ds.begin(), ds.end());
    can_determine_sg();
}

void CpsNode::on_out(InstanceId inst) {
    if (!instance_ || *instance_ != inst) return;
    done_.insert(inst);
    instance_.reset();
    ds_.insert(pds_.begin(), pds_.end());
    fin_ = false;
    mk_list_.clear();
    mk_list_assigned_ = false;
    msg_q_.clear();
    pending_checkpoint_.reset();
    reprocess_markers();
}

void CpsNode::on_fin(const std::vector<NodeId>& list, InstanceId inst) {
    if (!instance_ || *instance_ != inst) return;
    mk_list_.clear();
    mk_list_.insert(list.begin(), list.end());
    mk_list_assigned_ = true;
    fin_ = true;
    check_termination();
}

void CpsNode::can_determine_sg() {
    if (!is_initiator() || fin_) return;
    if (is_subset(mk_to_, mk_from_) && wait_.empty()) {
        fin_ = true;
        start_phase2();
    }
}

void CpsNode::check_termination() {
    if (!instance_ || !fin_ || !mk_list_assigned_ || in_phase2_) return;
    if (!is_subset(mk_list_, rcv_mk_)) return;
    auto it = msg_q_.begin();
    while (it != msg_q_.end()) {
        if (mk_list_.count(it->first)) {
            pending_checkpoint_->in_transit.push_back({it->first, it->second});
            it = msg_q_.erase(it);
        } else {
            ++it;
        }
    }
    terminate_instance();
}

void CpsNode::terminate_instance() {
    // Collided markers whose sender appears in our Fin list were absorbed into
    // the cross-group coordination (we count their markers in this cut), so
    // they must not be replayed; only genuinely unresolved collisions are,
    // which lets a still-blocked opponent group record us afterwards.
    collided_.erase(std::remove_if(collided_.begin(), collided_.end(),
                                   [&](const auto& e) {
                                       return mk_list_.count(e.first) != 0;
                                   }),
                    collided_.end());
    auto record = std::make_shared<const CheckpointRecord>(*pending_checkpoint_);
    latest_checkpoint_ = *record;
    log_->terminated(id_, *instance_, record);
    done_.insert(*instance_);
    instance_.reset();
    fin_ = false;
    mk_list_.clear();
    mk_list_assigned_ = false;
    rcv_mk_.clear();
    pending_checkpoint_.reset();
    mk_from_.clear();
    members_.clear();
    mk_to_.clear();
    ds_info_.clear();
    wait_.clear();
    link_sent_.clear();
    nbrs_.clear();
    in_phase2_ = false;
    phase2_done_ = false;
    child_.clear();
    lt_.clear();
    ck_.clear();
    ck_rid_.clear();
    lt_sent_ = false;
    phase2_pending_.clear();
    reprocess_markers();
}

void CpsNode::reprocess_markers() {
    auto pending = std::move(collided_);
    collided_.clear();
    for (const auto& [from, inst] : pending) on_marker(from, inst);
}

// -------------------------------------------------------- collision handling

void CpsNode::on_newinit(NodeId detector, NodeId marker_sender, InstanceId opp,
                         InstanceId inst) {
    if (!instance_ || *instance_ != inst || instance_->initiator != id_) return;
    NodeId pb = opp.initiator;
    Payload link;
    link.a = detector;
    link.b = marker_sender;
    link.opp = opp;  // which instance of the opponent this link targets
    bool relay = link_sent_.insert({pb, detector}).second;
    if (!fin_) {
        if (!nbrs_.count(pb)) {
            wait_[{detector, marker_sender, pb}] = opp;
            if (relay) emit(make(pb, Kind::Link, std::move(link), *instance_));
        } else {
            mk_from_.insert(marker_sender);
            mk_to_.insert(detector);
            ds_info_[marker_sender].insert(detector);
            if (relay) emit(make(pb, Kind::Link, std::move(link), *instance_));
            Payload acc;
            acc.a = marker_sender;
            acc.opp = opp;
            emit(make(detector, Kind::Accept, std::move(acc), *instance_));
            can_determine_sg();
        }
    } else if (nbrs_.count(pb)) {
        // Already linked with the opponent, so the collided node's checkpoint
        // is covered by this snapshot even though the group is determined:
        // record the dependency so the Fin list makes it await (and record
        // messages from) the foreign sender, and tell it the collision is
        // resolved so the marker is not replayed.
        mk_from_.insert(marker_sender);
        ds_info_[marker_sender].insert(detector);
        if (relay) emit(make(pb, Kind::Link, std::move(link), *instance_));
        Payload acc;
        acc.a = marker_sender;
        acc.opp = opp;
        emit(make(detector, Kind::Accept, std::move(acc), *instance_));
    }
}

void CpsNode::on_link(NodeId from, NodeId detector, NodeId marker_sender,
                      InstanceId target, InstanceId requester) {
    if (instance_ && *instance_ == target && instance_->initiator == id_ && !fin_) {
        mk_from_.insert(detector);
        if (!nbrs_.count(from)) {
            nbrs_.insert(from);
            mk_to_.insert(marker_sender);
            ds_info_[detector].insert(marker_sender);
            Payload ack;
            ack.a = detector;
            ack.b = marker_sender;
            ack.opp = requester;
            emit(make(from, Kind::Ack, std::move(ack), *instance_));
            accept_collided_nodes(from);
        }
        can_determine_sg();
    } else {
        Payload deny;
        deny.a = detector;
        deny.b = marker_sender;
        deny.opp = requester;
        emit(make(from, Kind::Deny, std::move(deny), target));
    }
}

void CpsNode::on_ack(NodeId from, InstanceId echo) {
    if (!instance_ || *instance_ != echo || instance_->initiator != id_) return;
    nbrs_.insert(from);
    accept_collided_nodes(from);
    can_determine_sg();
}

void CpsNode::on_deny(NodeId from, NodeId detector, NodeId marker_sender,
                      InstanceId echo) {
    if (!instance_ || *instance_ != echo || instance_->initiator != id_) return;
    wait_.erase({detector, marker_sender, from});
    if (!nbrs_.count(from)) can_determine_sg();
}

void CpsNode::on_accept(NodeId marker_sender, InstanceId opp, InstanceId inst) {
    if (!instance_ || *instance_ != inst) return;
    if (!pds_.count(marker_sender)) {
        Payload m;
        m.a = opp.initiator;
        emit(make(marker_sender, Kind::Marker, std::move(m), opp));
    }
    auto entry = std::make_pair(marker_sender, opp);
    collided_.erase(std::remove(collided_.begin(), collided_.end(), entry),
                    collided_.end());
}

void CpsNode::accept_collided_nodes(NodeId linked) {
    std::vector<std::pair<std::tuple<NodeId, NodeId, NodeId>, InstanceId>> matched;
    for (auto it = wait_.begin(); it != wait_.end();) {
        if (std::get<2>(it->first) == linked) {
            matched.emplace_back(it->first, it->second);
            it = wait_.erase(it);
        } else {
            ++it;
        }
    }
    for (const auto& [key, opp] : matched) {
        auto [detector, marker_sender, pb] = key;
        mk_from_.insert(marker_sender);
        mk_to_.insert(detector);
        ds_info_[marker_sender].insert(detector);
        Payload acc;
        acc.a = marker_sender;
        acc.opp = opp;
        emit(make(detector, Kind::Accept, std::move(acc), *instance_));
    }
}

// ---------------------------------------------------------------- phase 2

void CpsNode::start_phase2() {
    log_->phase2_enter(id_, *instance_);
    if (nbrs_.empty()) {
        log_->phase2_exit(id_, *instance_);
        finish_phase2();
        return;
    }
    root_ = id_;
    dist_ = 0;
    parent_ = id_;
    child_.clear();
    lt_.clear();
    ck_.clear();
    ck_rid_.clear();
    lt_sent_ = false;
    in_phase2_ = true;
    for (NodeId j : nbrs_) {
        Payload c;
        c.a = root_;
        c.dist = dist_;
        c.b = parent_;
        emit(make(j, Kind::Check, std::move(c), *instance_));
    }
    auto buffered = std::move(phase2_pending_);
    phase2_pending_.clear();
    for (const Envelope& env : buffered) phase2_message(env);
}

void CpsNode::phase2_message(const Envelope& env) {
    if (!nbrs_.count(env.from)) return;  // stale sender, not a neighbour
    if (!in_phase2_) {
        if (!phase2_done_) phase2_pending_.push_back(env);
        return;
    }
    switch (env.kind) {
        case Kind::Check:
            on_check(env.from, env.payload.a, env.payload.dist, env.payload.b);
            break;
        case Kind::LocalTerm:
            on_localterm(env.from);
            break;
        case Kind::GlobalTerm:
            on_globalterm();
            break;
        default:
            break;
    }
}

void CpsNode::on_check(NodeId from, NodeId root, int dist, NodeId parent) {
    ck_.insert(from);
    ck_rid_[from] = root;
    lt_.erase(from);  // a fresh Check invalidates the sender's convergecast
    lt_sent_ = false;
    if (root < root_ || (root == root_ && dist + 1 < dist_)) {
        root_ = root;
        dist_ = dist + 1;
        parent_ = from;
        for (NodeId j : nbrs_) {
            Payload c;
            c.a = root_;
            c.dist = dist_;
            c.b = parent_;
            emit(make(j, Kind::Check, std::move(c), *instance_));
        }
    }
    if (parent == id_) {
        child_.insert(from);
    } else if (child_.count(from)) {
        child_.erase(from);
    }
    maybe_convergecast();
}

void CpsNode::on_localterm(NodeId from) {
    lt_.insert(from);
    maybe_convergecast();
}

void CpsNode::maybe_convergecast() {
    // Progress only once every neighbour's last advertised root matches ours;
    // a neighbour holding a stale root may still pick us as its parent, so
    // reporting upward before agreement can strand it outside the tree.
    if (ck_ != nbrs_) return;
    for (NodeId j : nbrs_)
        if (ck_rid_.at(j) != root_) return;
    if (parent_ == id_) {
        if (root_ == id_ && child_ == nbrs_ && lt_ == nbrs_) {
            for (NodeId j : child_) emit(make(j, Kind::GlobalTerm, {}, *instance_));
            finish_phase2();
        }
    } else if (!lt_sent_ && std::includes(lt_.begin(), lt_.end(),
                                          child_.begin(), child_.end())) {
        lt_sent_ = true;
        emit(make(parent_, Kind::LocalTerm, {}, *instance_));
    }
}

void CpsNode::on_globalterm() {
    for (NodeId j : child_) emit(make(j, Kind::GlobalTerm, {}, *instance_));
    finish_phase2();
}

void CpsNode::finish_phase2() {
    if (in_phase2_) {
        in_phase2_ = false;
        log_->phase2_exit(id_, *instance_);
    }
    phase2_done_ = true;
    // Compute every member's wait list up front: delivering our own Fin below
    // can terminate this instance and clear DSInfo mid-loop.
    std::vector<std::pair<NodeId, std::vector<NodeId>>> fins;
    for (NodeId k : members_) {
        std::vector<NodeId> list;
        for (const auto& [x, ds_x] : ds_info_)
            if (ds_x.count(k)) list.push_back(x);
        fins.emplace_back(k, std::move(list));
    }
    InstanceId inst = *instance_;
    for (auto& [k, list] : fins) {
        Payload p;
        p.ids = std::move(list);
        emit(make(k, Kind::Fin, std::move(p), inst));
    }
}

// ---------------------------------------------------------------- rollback

void CpsNode::on_rbmarker(NodeId from, InstanceId inst) {
    if (!rb_instance_) {
        app_paused_ = true;
        rb_instance_ = inst;
        rb_fin_ = false;
        rb_rcv_mk_.clear();
        rb_rcv_mk_.insert(from);
        rb_mk_list_.clear();
        rb_mk_list_assigned_ = false;
        rb_mk_from_.clear();
        rb_mk_to_.clear();
        rb_ds_info_.clear();
        Payload myds;
        myds.ids.assign(ds_.begin(), ds_.end());
        emit(make(inst.initiator, Kind::RbMyDS, std::move(myds), inst));
        for (NodeId k : ds_) {
            Payload m;
            m.a = inst.initiator;
            emit(make(k, Kind::RbMarker, std::move(m), inst));
        }
    } else if (*rb_instance_ == inst) {
        rb_rcv_mk_.insert(from);
        if (rb_fin_) check_rb_termination();
    }
    // a concurrent rollback of a different group is dropped
}

void CpsNode::on_rbmyds(NodeId from, const std::vector<NodeId>& ds,
                        InstanceId inst) {
    if (!rb_instance_ || *rb_instance_ != inst || rb_instance_->initiator != id_ ||
        rb_fin_) {
        emit(make(from, Kind::RbOut, {}, inst));
        return;
    }
    rb_mk_from_.insert(from);
    rb_mk_to_.insert(ds.begin(), ds.end());
    rb_ds_info_[from].insert(ds.begin(), ds.end());
    if (is_subset(rb_mk_to_, rb_mk_from_)) {
        rb_fin_ = true;
        std::vector<std::pair<NodeId, std::vector<NodeId>>> fins;
        for (NodeId k : rb_mk_from_) {
            std::vector<NodeId> list;
            for (const auto& [x, ds_x] : rb_ds_info_)
                if (ds_x.count(k)) list.push_back(x);
            fins.emplace_back(k, std::move(list));
        }
        for (auto& [k, list] : fins) {
            Payload p;
            p.ids = std::move(list);
            emit(make(k, Kind::RbFin, std::move(p), inst));
        }
    }
}

void CpsNode::on_rbout(InstanceId inst) {
    if (!rb_instance_ || *rb_instance_ != inst) return;
    rb_instance_.reset();
    rb_fin_ = false;
    app_paused_ = false;
}

void CpsNode::on_rbfin(const std::vector<NodeId>& list, InstanceId inst) {
    if (!rb_instance_ || *rb_instance_ != inst) return;
    rb_mk_list_.clear();
    rb_mk_list_.insert(list.begin(), list.end());
    rb_mk_list_assigned_ = true;
    rb_fin_ = true;
    check_rb_termination();
}

void CpsNode::check_rb_termination() {
    if (!rb_instance_ || !rb_mk_list_assigned_) return;
    if (!is_subset(rb_mk_list_, rb_rcv_mk_)) return;

    app_state_ = latest_checkpoint_ ? latest_checkpoint_->local_state : 0;
    ds_.clear();
    std::vector<InTransitMsg> restored;
    if (latest_checkpoint_)
        for (const InTransitMsg& m : latest_checkpoint_->in_transit)
            restored.push_back(m);
    for (const auto& [sender, msg_id] : msg_q_)
        if (!rb_mk_list_.count(sender)) restored.push_back({sender, msg_id});
    msg_q_.clear();
    for (const InTransitMsg& m : restored) {
        // put the message back onto the incoming link so the application
        // receives it again after resuming
        Envelope e;
        e.from = m.sender;
        e.to = id_;
        e.kind = Kind::App;
        e.payload.msg_id = m.msg_id;
        out_.push_back(std::move(e));
    }
    log_->rollback_restored(id_, app_state_, restored);
    rb_instance_.reset();
    rb_fin_ = false;
    rb_mk_list_.clear();
    rb_mk_list_assigned_ = false;
    rb_rcv_mk_.clear();
    rb_mk_from_.clear();
    rb_mk_to_.clear();
    rb_ds_info_.clear();
    app_paused_ = false;
}

}  // namespace psnap
