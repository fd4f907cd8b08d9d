#include "psnap/css_node.hpp"

#include <algorithm>

namespace psnap {

namespace {

bool is_subset(const std::set<NodeId>& sub, const std::set<NodeId>& super) {
    return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

}  // namespace

Envelope CssNode::make(NodeId to, Kind kind, Payload payload,
                       std::optional<InstanceId> inst) const {
    Envelope e;
    e.from = id_;
    e.to = to;
    e.instance = inst;
    e.kind = kind;
    e.payload = std::move(payload);
    return e;
}

void CssNode::emit(Envelope env) {
    if (env.to == id_ && env.from == id_) {
        handle(env);
    } else {
        out_.push_back(std::move(env));
    }
}

void CssNode::forward_up(const Envelope& env) {
    Envelope copy = env;
    copy.from = id_;
    copy.to = parent_;
    copy.forwarded = true;
    copy.env_id = 0;
    emit(std::move(copy));
}

std::vector<Envelope> CssNode::deliver(const Envelope& env) {
    out_.clear();
    handle(env);
    return std::move(out_);
}

std::vector<Envelope> CssNode::start_snapshot(int sequence) {
    out_.clear();
    if (instance_ || initiated_) return {};
    InstanceId inst{id_, sequence};
    initiated_ = true;
    is_main_ = true;
    parent_ = -1;
    domain_ = {id_};
    instances_ = {inst};
    join(inst, id_);
    // the initiator's own dependency-set report is absorbed locally
    mk_from_.insert(id_);
    mk_to_.insert(pds_.begin(), pds_.end());
    ds_info_[id_].insert(pds_.begin(), pds_.end());
    member_instance_[id_] = inst;
    try_determine();
    return std::move(out_);
}

std::vector<Envelope> CssNode::send_app(NodeId dest, std::uint64_t msg_id) {
    out_.clear();
    if (instance_ && !pds_.count(dest) && !ds_.count(dest)) {
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

void CssNode::handle(const Envelope& env) {
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
        case Kind::Out:
            on_out(*env.instance);
            break;
        case Kind::Fin:
            on_fin(p.ids, *env.instance);
            break;
        case Kind::Accept:
            on_accept(env);
            break;
        case Kind::CssDSinfo:
            on_dsinfo(env);
            break;
        case Kind::NewInit:
            on_newinit(env);
            break;
        case Kind::CssCombine:
            on_combine(env);
            break;
        case Kind::CssCompInit:
            on_compinit(env);
            break;
        case Kind::CssInitInfo:
            on_initinfo(env);
            break;
        default:
            break;
    }
}

// ------------------------------------------------------------- member level

void CssNode::join(InstanceId inst, NodeId first_marker_from) {
    instance_ = inst;
    route_ = inst.initiator;
    fin_ = false;
    rcv_mk_.clear();
    rcv_mk_.insert(first_marker_from);
    pds_ = ds_;
    ds_.clear();
    mk_list_.clear();
    mk_list_assigned_ = false;
    msg_q_.clear();

    pending_checkpoint_ = CheckpointRecord{id_, inst, app_state_, {}};
    log_->checkpoint(id_, inst);

    if (inst.initiator != id_) {
        Payload report;
        report.a = id_;
        report.ids.assign(pds_.begin(), pds_.end());
        emit(make(inst.initiator, Kind::CssDSinfo, std::move(report), inst));
    }
    for (NodeId k : pds_) {
        Payload m;
        m.a = inst.initiator;
        emit(make(k, Kind::Marker, std::move(m), inst));
    }
}

void CssNode::on_marker(NodeId from, InstanceId inst) {
    if (!instance_) {
        join(inst, from);
    } else if (*instance_ == inst) {
        rcv_mk_.insert(from);
        if (fin_) check_termination();
    } else {
        rcv_mk_.insert(from);
        auto entry = std::make_pair(from, inst);
        if (std::find(collided_.begin(), collided_.end(), entry) == collided_.end())
            collided_.push_back(entry);
        if (!fin_) {
            Payload p;
            p.a = from;
            p.b = id_;
            p.opp = inst;
            emit(make(instance_->initiator, Kind::NewInit, std::move(p), *instance_));
        }
    }
}

void CssNode::on_out(InstanceId inst) {
    if (!instance_ || *instance_ != inst) return;
    instance_.reset();
    ds_.insert(pds_.begin(), pds_.end());
    fin_ = false;
    mk_list_.clear();
    mk_list_assigned_ = false;
    msg_q_.clear();
    pending_checkpoint_.reset();
    reprocess_markers();
}

void CssNode::on_fin(const std::vector<NodeId>& list, InstanceId inst) {
    if (!instance_ || *instance_ != inst) return;
    mk_list_.clear();
    mk_list_.insert(list.begin(), list.end());
    mk_list_assigned_ = true;
    fin_ = true;
    check_termination();
}

void CssNode::on_accept(const Envelope& env) {
    if (!instance_ || *instance_ != *env.instance) {
        // the collision is stale; close the accepter's token so it can move on
        Payload p;
        p.a = -1;
        p.reason = MergeReason::Decline;
        p.msg_id = env.payload.msg_id;
        emit(make(env.from, Kind::CssInitInfo, std::move(p), *env.instance));
        return;
    }
    NodeId marker_sender = env.payload.a;
    InstanceId opp = env.payload.opp;
    auto entry = std::make_pair(marker_sender, opp);
    collided_.erase(std::remove(collided_.begin(), collided_.end(), entry),
                    collided_.end());
    Payload p;
    p.a = env.from;  // accepting main, so the opponent main can compare ids
    p.b = id_;       // detector
    p.opp = opp;
    p.msg_id = env.payload.msg_id;
    emit(make(marker_sender, Kind::CssCombine, std::move(p), *instance_));
}

void CssNode::check_termination() {
    if (!instance_ || !fin_ || !mk_list_assigned_) return;
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

void CssNode::terminate_instance() {
    auto record = std::make_shared<const CheckpointRecord>(*pending_checkpoint_);
    latest_checkpoint_ = *record;
    log_->terminated(id_, *instance_, record);
    instance_.reset();
    fin_ = false;
    mk_list_.clear();
    mk_list_assigned_ = false;
    rcv_mk_.clear();
    pending_checkpoint_.reset();
    reprocess_markers();
}

void CssNode::reprocess_markers() {
    auto pending = std::move(collided_);
    collided_.clear();
    for (const auto& [from, inst] : pending) on_marker(from, inst);
}

// ----------------------------------------------------------- initiator level

void CssNode::on_dsinfo(const Envelope& env) {
    if (initiated_ && parent_ != -1) {
        forward_up(env);
        return;
    }
    NodeId sender = env.payload.a;
    if (initiated_ && is_main_ && !group_determined_ &&
        instances_.count(*env.instance)) {
        mk_from_.insert(sender);
        mk_to_.insert(env.payload.ids.begin(), env.payload.ids.end());
        ds_info_[sender].insert(env.payload.ids.begin(), env.payload.ids.end());
        member_instance_[sender] = *env.instance;
        try_determine();
    } else {
        // finished or no longer running: cancel the sender's instance so it
        // can join a later snapshot
        emit(make(sender, Kind::Out, {}, *env.instance));
    }
}

void CssNode::on_newinit(const Envelope& env) {
    if (initiated_ && parent_ != -1) {
        forward_up(env);
        return;
    }
    if (!initiated_ || !is_main_ || group_determined_) return;
    PendingCollision pc;
    pc.marker_sender = env.payload.a;
    pc.detector = env.payload.b;
    pc.opponent = env.payload.opp;
    pc.detector_instance = *env.instance;
    pending_.push_back(pc);
    accept_next_collision();
}

std::uint64_t CssNode::make_token() {
    return (static_cast<std::uint64_t>(id_) << 20) |
           static_cast<std::uint64_t>(++token_seq_);
}

void CssNode::decline_token(std::uint64_t token, InstanceId inst) {
    NodeId creator = static_cast<NodeId>(token >> 20);
    Payload p;
    p.a = -1;
    p.reason = MergeReason::Decline;
    p.msg_id = token;
    emit(make(creator, Kind::CssInitInfo, std::move(p), inst));
}

void CssNode::accept_next_collision() {
    if (!open_.empty() || group_determined_ || pending_.empty()) return;
    PendingCollision pc = pending_.front();
    pending_.pop_front();
    std::uint64_t token = make_token();
    open_.insert(token);
    Payload acc;
    acc.a = pc.marker_sender;
    acc.opp = pc.opponent;
    acc.msg_id = token;
    emit(make(pc.detector, Kind::Accept, std::move(acc), pc.detector_instance));
}

void CssNode::on_combine(const Envelope& env) {
    if (initiated_ && parent_ != -1) {
        forward_up(env);
        return;
    }
    if (!initiated_) {
        // ordinary member: relay toward its group's initiator
        if (route_ != -1 && route_ != id_) {
            Envelope copy = env;
            copy.from = id_;
            copy.to = route_;
            copy.forwarded = true;
            copy.env_id = 0;
            emit(std::move(copy));
        } else {
            decline_token(env.payload.msg_id, *env.instance);
        }
        return;
    }
    NodeId acc_main = env.payload.a;
    std::uint64_t token = env.payload.msg_id;
    if (group_determined_) {
        decline_token(token, *env.instance);
        return;
    }
    if (acc_main == id_ || domain_.count(acc_main)) {
        // the colliding groups already merged under this main
        open_.erase(token);
        accept_next_collision();
        try_determine();
        return;
    }
    if (acc_main < id_) {
        resign_to(acc_main, MergeReason::ResignToAccepter, token);
    } else {
        // this side is the smaller root; propose that the accepter merge here
        std::uint64_t mine = make_token();
        open_.insert(mine);
        Payload p;
        p.a = id_;
        p.msg_id = token;
        p.aux = mine;
        emit(make(acc_main, Kind::CssCompInit, std::move(p), *env.instance));
    }
}

void CssNode::on_compinit(const Envelope& env) {
    if (initiated_ && parent_ != -1) {
        forward_up(env);
        return;
    }
    if (!initiated_ || !is_main_) return;
    NodeId sender_root = env.payload.a;
    std::uint64_t theirs = env.payload.msg_id;  // accept-side token
    std::uint64_t mine = env.payload.aux;       // response-side token
    bool has_theirs = open_.count(theirs) != 0;
    bool has_mine = open_.count(mine) != 0;
    if (has_theirs && has_mine) {
        // both sides of the collision already merged under this root
        open_.erase(theirs);
        open_.erase(mine);
        accept_next_collision();
        try_determine();
        return;
    }
    if (group_determined_) {
        if (has_theirs) open_.erase(theirs);
        else decline_token(theirs, *env.instance);
        if (has_mine) open_.erase(mine);
        else decline_token(mine, *env.instance);
        return;
    }
    if (!has_theirs && !has_mine) return;  // stale duplicate
    std::uint64_t held = has_theirs ? theirs : mine;
    std::uint64_t other = has_theirs ? mine : theirs;
    if (sender_root < id_) {
        open_.erase(held);
        resign_to(sender_root, MergeReason::ReplyToCompInit, other);
    } else {
        // this root is smaller and wins; bounce the proposal back
        Payload p;
        p.a = id_;
        p.msg_id = theirs;
        p.aux = mine;
        emit(make(sender_root, Kind::CssCompInit, std::move(p), *env.instance));
    }
}

void CssNode::on_initinfo(const Envelope& env) {
    if (initiated_ && parent_ != -1) {
        forward_up(env);
        return;
    }
    if (!initiated_ || !is_main_) return;
    if (env.payload.msg_id) open_.erase(env.payload.msg_id);
    if (env.payload.merge) absorb_merge(*env.payload.merge);
    accept_next_collision();
    try_determine();
}

void CssNode::resign_to(NodeId winner, MergeReason reason,
                        std::uint64_t token) {
    auto info = std::make_shared<CssMergeInfo>();
    info->ds_info = ds_info_;
    info->mk_from = mk_from_;
    info->mk_to = mk_to_;
    info->domain = domain_;
    info->instances = instances_;
    info->member_instances = member_instance_;
    info->pending.assign(pending_.begin(), pending_.end());
    info->open_tokens = open_;
    Payload p;
    p.a = id_;
    p.reason = reason;
    p.msg_id = token;
    p.merge = std::move(info);
    std::optional<InstanceId> inst = instance_;
    if (!inst && !instances_.empty()) inst = *instances_.begin();
    emit(make(winner, Kind::CssInitInfo, std::move(p), inst));
    is_main_ = false;
    parent_ = winner;
    mk_from_.clear();
    mk_to_.clear();
    ds_info_.clear();
    member_instance_.clear();
    domain_.clear();
    instances_.clear();
    pending_.clear();
    open_.clear();
}

void CssNode::absorb_merge(const CssMergeInfo& info) {
    for (const auto& [node, ds] : info.ds_info)
        ds_info_[node].insert(ds.begin(), ds.end());
    mk_from_.insert(info.mk_from.begin(), info.mk_from.end());
    mk_to_.insert(info.mk_to.begin(), info.mk_to.end());
    domain_.insert(info.domain.begin(), info.domain.end());
    instances_.insert(info.instances.begin(), info.instances.end());
    for (const auto& [node, inst] : info.member_instances)
        member_instance_.insert({node, inst});
    for (const PendingCollision& pc : info.pending) pending_.push_back(pc);
    open_.insert(info.open_tokens.begin(), info.open_tokens.end());
}

void CssNode::try_determine() {
    if (!initiated_ || !is_main_ || group_determined_) return;
    if (!open_.empty() || !pending_.empty()) return;
    if (!is_subset(mk_to_, mk_from_)) return;
    group_determined_ = true;
    std::vector<std::pair<NodeId, std::vector<NodeId>>> fins;
    for (NodeId k : mk_from_) {
        std::vector<NodeId> list;
        for (const auto& [x, ds_x] : ds_info_)
            if (ds_x.count(k)) list.push_back(x);
        fins.emplace_back(k, std::move(list));
    }
    for (auto& [k, list] : fins) {
        Payload p;
        p.ids = std::move(list);
        auto it = member_instance_.find(k);
        InstanceId inst = it != member_instance_.end() ? it->second
                                                       : *instances_.begin();
        emit(make(k, Kind::Fin, std::move(p), inst));
    }
}

}  // namespace psnap
