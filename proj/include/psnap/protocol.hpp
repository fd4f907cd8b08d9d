#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

namespace psnap {

using NodeId = int;

/// Identifies one snapshot (or rollback) algorithm instance: the initiator's
/// id plus a per-initiator sequence number.
struct InstanceId {
    NodeId initiator = -1;
    int sequence = 0;
    auto operator<=>(const InstanceId&) const = default;
};

enum class Kind {
    App,
    // partial-snapshot phase 1
    Marker,
    MyDS,
    Out,
    Fin,
    // collision handling
    NewInit,
    Link,
    Ack,
    Deny,
    Accept,
    // termination detection on the initiator network
    Check,
    LocalTerm,
    GlobalTerm,
    // rollback
    RbMarker,
    RbMyDS,
    RbOut,
    RbFin,
    // CSS baseline
    CssDSinfo,
    CssCombine,
    CssCompInit,
    CssInitInfo,
};

enum class Category { Marker, Normal, Collision, InitiatorNetwork, Application };

/// Message-type taxonomy used by the metrics. `forwarded` marks CSS messages
/// relayed from a sub-initiator toward its main-initiator; those count as
/// initiator-network traffic instead of their base category.
Category classify(Kind kind, bool forwarded);

std::string_view kind_name(Kind k);
std::string_view category_name(Category c);
std::optional<Kind> kind_from_name(std::string_view name);

/// A NewInit waiting in a CSS main-initiator's queue while another collision
/// is being resolved.
struct PendingCollision {
    NodeId marker_sender = -1;  // the node whose Marker collided
    NodeId detector = -1;       // the node that reported the collision
    InstanceId opponent;        // instance of the colliding group
    InstanceId detector_instance;
};

enum class MergeReason { ResignToAccepter, ReplyToCompInit, Decline };

/// Everything a resigning CSS main-initiator ships to its new main.
struct CssMergeInfo {
    std::map<NodeId, std::set<NodeId>> ds_info;
    std::set<NodeId> mk_from;
    std::set<NodeId> mk_to;
    std::set<NodeId> domain;  // initiator ids in the shipped subtree
    std::set<InstanceId> instances;
    std::map<NodeId, InstanceId> member_instances;
    std::vector<PendingCollision> pending;
    // unresolved collision tokens the new main inherits and must see closed
    std::set<std::uint64_t> open_tokens;
};

// One payload struct covers every kind; unused fields stay at defaults.
//   Marker/RbMarker  a = initiator id
//   MyDS/RbMyDS      ids = dependency set
//   Fin/RbFin        ids = marker-wait list
//   NewInit          a = marker sender, b = detector, opp = opponent instance
//   Link             a = detector, b = marker sender, opp = target instance
//   Ack/Deny         a, b echoed; opp = requester's instance
//   Accept           a = marker sender, opp = opponent instance, msg_id = token
//   Check            a = root id, dist = distance, b = parent id
//   App              msg_id
//   CssDSinfo        a = original sender, ids = dependency set
//   CssCombine       a = accepting main, b = detector, opp = opponent
//                    instance, msg_id = accept-side token
//   CssCompInit      a = proposing root, msg_id = accept-side token,
//                    aux = response-side token
//   CssInitInfo      a = resigning main (-1 on decline), reason, merge,
//                    msg_id = token the receiver closes
struct Payload {
    NodeId a = -1;
    NodeId b = -1;
    int dist = -1;
    std::vector<NodeId> ids;
    InstanceId opp;
    std::uint64_t msg_id = 0;
    std::uint64_t aux = 0;
    MergeReason reason = MergeReason::ResignToAccepter;
    std::shared_ptr<const CssMergeInfo> merge;
};

struct Envelope {
    NodeId from = -1;
    NodeId to = -1;
    std::optional<InstanceId> instance;  // absent for App messages
    Kind kind = Kind::App;
    Payload payload;
    int sent_round = 0;
    bool forwarded = false;
    std::uint64_t env_id = 0;  // assigned by the scheduler
};

struct InTransitMsg {
    NodeId sender = -1;
    std::uint64_t msg_id = 0;
    bool operator==(const InTransitMsg&) const = default;
};

/// A node's saved state: the opaque application state at recording time plus
/// the in-transit messages collected at instance termination.
struct CheckpointRecord {
    NodeId owner = -1;
    InstanceId instance;
    std::uint64_t local_state = 0;
    std::vector<InTransitMsg> in_transit;
};

}  // namespace psnap
