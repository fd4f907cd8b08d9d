#include "psnap/checker.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace psnap {

using nlohmann::json;

bool VerdictReport::all_pass() const {
    for (const Verdict& v : checks)
        if (!v.pass) return false;
    return true;
}

std::string VerdictReport::to_json() const {
    json j;
    j["pass"] = all_pass();
    json checks = json::array();
    for (const Verdict& v : this->checks) {
        json c;
        c["name"] = v.name;
        c["pass"] = v.pass;
        if (!v.detail.empty()) c["detail"] = v.detail;
        if (!v.counterexample_events.empty())
            c["counterexample_events"] = v.counterexample_events;
        checks.push_back(std::move(c));
    }
    j["checks"] = std::move(checks);
    return j.dump(2);
}

namespace {

struct MsgInfo {
    std::size_t send_idx = 0;
    std::optional<std::size_t> recv_idx;  // first receive only
    NodeId sender = -1;
    NodeId receiver = -1;
};

struct CommittedCheckpoint {
    std::shared_ptr<const CheckpointRecord> record;
    std::size_t rec_idx = 0;
    std::size_t term_idx = 0;
};

// application messages by id, first receive only
std::map<std::uint64_t, MsgInfo> app_messages(const EventLog& log) {
    std::map<std::uint64_t, MsgInfo> msgs;
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const Event& ev = log.events[i];
        if (ev.kind != Kind::App) continue;
        if (ev.type == EventType::Send) {
            auto [it, fresh] = msgs.try_emplace(ev.msg_id);
            if (fresh) {
                it->second.send_idx = i;
                it->second.sender = ev.node;
                it->second.receiver = ev.peer;
            }
        } else if (ev.type == EventType::Receive) {
            auto it = msgs.find(ev.msg_id);
            if (it != msgs.end() && !it->second.recv_idx) it->second.recv_idx = i;
        }
    }
    return msgs;
}

// every committed checkpoint per node, in commit order
std::map<NodeId, std::vector<CommittedCheckpoint>> committed_checkpoints(
    const EventLog& log);

// Checkpoints are only mutually consistent within one snapshot episode: the
// set of instances whose groups coordinated their cuts.  Coordination is
// visible on the wire as an Ack accepting a link request, or as one of the
// centralized merge messages; each such receive joins the envelope's
// instance with the instance the receiving node last recorded under.  A node
// that re-records for a blocked opponent group commits a second record in a
// separate episode, and pairing records across episodes is meaningless.
struct InstanceDsu {
    std::map<InstanceId, InstanceId> parent;
    InstanceId find(InstanceId x) {
        auto [it, fresh] = parent.try_emplace(x, x);
        if (!(it->second < x) && !(x < it->second)) return x;
        InstanceId r = find(it->second);
        parent[x] = r;
        return r;
    }
    void unite(InstanceId a, InstanceId b) {
        a = find(a);
        b = find(b);
        if (a < b || b < a) parent[a] = b;
    }
};

std::map<InstanceId, int> snapshot_episodes(const EventLog& log) {
    InstanceDsu dsu;
    std::map<NodeId, InstanceId> current;  // instance of the last recording
    for (const Event& ev : log.events) {
        if (ev.type == EventType::Checkpoint && ev.instance) {
            current[ev.node] = *ev.instance;
            dsu.find(*ev.instance);
        } else if (ev.type == EventType::Receive && ev.instance &&
                   (ev.kind == Kind::Ack || ev.kind == Kind::CssDSinfo ||
                    ev.kind == Kind::CssCombine ||
                    ev.kind == Kind::CssCompInit ||
                    ev.kind == Kind::CssInitInfo)) {
            auto it = current.find(ev.node);
            if (it != current.end()) dsu.unite(*ev.instance, it->second);
        }
    }
    std::map<InstanceId, int> out;
    std::map<InstanceId, int> id_of_root;
    for (const auto& [inst, unused] : dsu.parent) {
        InstanceId r = dsu.find(inst);
        auto [it, fresh] = id_of_root.try_emplace(r, (int)id_of_root.size());
        out[inst] = it->second;
    }
    return out;
}

// latest committed record per node within each episode
std::map<int, std::map<NodeId, CommittedCheckpoint>> episode_records(
    const EventLog& log) {
    auto episodes = snapshot_episodes(log);
    std::map<int, std::map<NodeId, CommittedCheckpoint>> out;
    for (const auto& [node, list] : committed_checkpoints(log)) {
        for (const CommittedCheckpoint& c : list) {
            auto e = episodes.find(c.record->instance);
            int id = e != episodes.end() ? e->second : -1;
            out[id][node] = c;  // commit order, so later wins
        }
    }
    return out;
}

std::map<NodeId, std::vector<CommittedCheckpoint>> committed_checkpoints(
    const EventLog& log) {
    std::map<NodeId, std::vector<CommittedCheckpoint>> out;
    std::map<std::pair<NodeId, InstanceId>, std::size_t> last_recording;
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const Event& ev = log.events[i];
        if (ev.type == EventType::Checkpoint && ev.instance) {
            last_recording[{ev.node, *ev.instance}] = i;
        } else if (ev.type == EventType::Terminated && ev.instance && ev.record) {
            auto it = last_recording.find({ev.node, *ev.instance});
            CommittedCheckpoint c;
            c.record = ev.record;
            c.rec_idx = it != last_recording.end() ? it->second : i;
            c.term_idx = i;
            out[ev.node].push_back(std::move(c));
        }
    }
    return out;
}

std::string describe(const EventLog& log, std::size_t idx) {
    const Event& ev = log.events[idx];
    std::ostringstream os;
    os << "event#" << idx << "(round " << ev.round << ", node " << ev.node << ")";
    return os.str();
}

bool dominates(const VectorClock& a, const VectorClock& b) {
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strict = true;
    }
    return strict;
}

// shortest event chain from one event to another over local order and
// application-message edges; used to attach witnesses to failures
std::vector<std::size_t> find_chain(const EventLog& log, std::size_t from,
                                    std::size_t to) {
    std::map<NodeId, std::vector<std::size_t>> by_node;
    std::map<std::uint64_t, std::size_t> recv_of;  // msg_id -> receive idx
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        by_node[log.events[i].node].push_back(i);
        if (log.events[i].type == EventType::Receive &&
            log.events[i].kind == Kind::App)
            recv_of.try_emplace(log.events[i].msg_id, i);
    }
    std::map<std::size_t, std::size_t> next_local;
    for (const auto& [node, list] : by_node)
        for (std::size_t k = 0; k + 1 < list.size(); ++k)
            next_local[list[k]] = list[k + 1];

    std::map<std::size_t, std::size_t> prev;
    std::queue<std::size_t> bfs;
    std::set<std::size_t> seen{from};
    bfs.push(from);
    while (!bfs.empty()) {
        std::size_t u = bfs.front();
        bfs.pop();
        if (u == to) break;
        std::vector<std::size_t> succ;
        auto nl = next_local.find(u);
        if (nl != next_local.end()) succ.push_back(nl->second);
        const Event& ev = log.events[u];
        if (ev.type == EventType::Send && ev.kind == Kind::App) {
            auto r = recv_of.find(ev.msg_id);
            if (r != recv_of.end()) succ.push_back(r->second);
        }
        for (std::size_t v : succ)
            if (seen.insert(v).second) {
                prev[v] = u;
                bfs.push(v);
            }
    }
    std::vector<std::size_t> chain;
    if (!seen.count(to)) return chain;
    for (std::size_t cur = to;;) {
        chain.push_back(cur);
        if (cur == from) break;
        auto p = prev.find(cur);
        if (p == prev.end()) break;
        cur = p->second;
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

}  // namespace

Verdict validate_log(const EventLog& log) {
    Verdict v{"log_wellformed"};
    struct SendInfo {
        NodeId from, to;
        int round;
        bool received = false;
    };
    std::map<std::uint64_t, SendInfo> sends;
    std::map<std::pair<NodeId, NodeId>, std::vector<std::uint64_t>> link_sends;
    std::map<std::pair<NodeId, NodeId>, std::size_t> link_cursor;
    std::set<NodeId> rolled_back;
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const Event& ev = log.events[i];
        if (ev.type == EventType::RollbackRestored) rolled_back.insert(ev.node);
        if (ev.type == EventType::Send) {
            sends[ev.env_id] = {ev.node, ev.peer, ev.round, false};
            link_sends[{ev.node, ev.peer}].push_back(ev.env_id);
        } else if (ev.type == EventType::Receive) {
            auto it = sends.find(ev.env_id);
            if (it == sends.end()) {
                if (rolled_back.count(ev.node)) continue;  // rollback replay
                v.pass = false;
                v.detail = "receive without a matching send: " + describe(log, i);
                v.counterexample_events = {i};
                return v;
            }
            SendInfo& s = it->second;
            if (s.received || s.from != ev.peer || s.to != ev.node ||
                ev.round <= s.round) {
                v.pass = false;
                v.detail = "delivery violates link semantics: " + describe(log, i);
                v.counterexample_events = {i};
                return v;
            }
            s.received = true;
            // FIFO: receives on one link must follow the send order
            auto key = std::make_pair(ev.peer, ev.node);
            auto& order = link_sends[key];
            std::size_t& cur = link_cursor[key];
            while (cur < order.size() && order[cur] != ev.env_id &&
                   sends[order[cur]].received)
                ++cur;
            if (cur >= order.size() || order[cur] != ev.env_id) {
                v.pass = false;
                v.detail = "link order violated: " + describe(log, i);
                v.counterexample_events = {i};
                return v;
            }
            ++cur;
        }
    }
    return v;
}

std::vector<VectorClock> assign_clocks(const EventLog& log, int n) {
    std::vector<VectorClock> clocks(log.events.size());
    std::vector<VectorClock> current(n, VectorClock(n, 0));
    std::map<std::uint64_t, VectorClock> app_send_clock;  // by msg_id
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const Event& ev = log.events[i];
        if (ev.node < 0 || ev.node >= n)
            throw MalformedLog("event node id out of range");
        VectorClock& c = current[ev.node];
        if (ev.type == EventType::Receive && ev.kind == Kind::App) {
            auto it = app_send_clock.find(ev.msg_id);
            if (it == app_send_clock.end())
                throw MalformedLog("application receive without a send");
            for (int k = 0; k < n; ++k) c[k] = std::max(c[k], it->second[k]);
        }
        c[ev.node] += 1;
        if (ev.type == EventType::Send && ev.kind == Kind::App)
            app_send_clock.try_emplace(ev.msg_id, c);
        clocks[i] = c;
    }
    return clocks;
}

Verdict check_checkpoint_concurrency(const EventLog& log, int n) {
    Verdict v{"checkpoint_concurrency"};
    auto clocks = assign_clocks(log, n);
    for (const auto& [ep, recs] : episode_records(log)) {
        std::vector<std::size_t> cut;  // recording indices in this episode
        for (const auto& [node, c] : recs) cut.push_back(c.rec_idx);
        for (std::size_t a = 0; a < cut.size(); ++a) {
            for (std::size_t b = a + 1; b < cut.size(); ++b) {
                std::size_t ia = cut[a], ib = cut[b];
                std::size_t lo = 0, hi = 0;
                if (dominates(clocks[ia], clocks[ib])) {
                    lo = ia; hi = ib;
                } else if (dominates(clocks[ib], clocks[ia])) {
                    lo = ib; hi = ia;
                } else {
                    continue;
                }
                v.pass = false;
                v.detail = "checkpoints causally ordered: " + describe(log, lo) +
                           " precedes " + describe(log, hi);
                v.counterexample_events = find_chain(log, lo, hi);
                if (v.counterexample_events.empty())
                    v.counterexample_events = {lo, hi};
                return v;
            }
        }
    }
    return v;
}

Verdict check_in_transit(const EventLog& log, int n) {
    (void)n;
    Verdict v{"in_transit_messages"};
    auto msgs = app_messages(log);
    for (const auto& [ep, recs] : episode_records(log)) {
        // msg ids recorded in each node's checkpoint for this episode
        std::map<NodeId, std::set<std::uint64_t>> recorded;
        for (const auto& [node, c] : recs)
            for (const InTransitMsg& m : c.record->in_transit)
                recorded[node].insert(m.msg_id);
        for (const auto& [msg_id, m] : msgs) {
            if (!m.recv_idx) continue;
            auto si = recs.find(m.sender);
            auto sj = recs.find(m.receiver);
            bool expected = false;
            if (si != recs.end() && sj != recs.end()) {
                const CommittedCheckpoint& ci = si->second;
                const CommittedCheckpoint& cj = sj->second;
                expected = m.send_idx < ci.rec_idx && *m.recv_idx > cj.rec_idx &&
                           *m.recv_idx < cj.term_idx;
            }
            bool actual = recorded.count(m.receiver) &&
                          recorded[m.receiver].count(msg_id);
            if (expected != actual) {
                v.pass = false;
                std::ostringstream os;
                os << "message " << msg_id << " from " << m.sender << " to "
                   << m.receiver << (actual ? " recorded" : " not recorded")
                   << " but cut position says " << (expected ? "recorded" : "not");
                v.detail = os.str();
                v.counterexample_events = {m.send_idx, *m.recv_idx};
                return v;
            }
        }
    }
    return v;
}

Verdict check_orphans(const EventLog& log, int n) {
    (void)n;
    Verdict v{"orphan_freedom"};
    auto msgs = app_messages(log);
    for (const auto& [ep, recs] : episode_records(log)) {
        for (const auto& [msg_id, m] : msgs) {
            if (!m.recv_idx) continue;
            auto si = recs.find(m.sender);
            auto sj = recs.find(m.receiver);
            if (si == recs.end() || sj == recs.end()) continue;
            if (m.send_idx > si->second.rec_idx &&
                *m.recv_idx < sj->second.rec_idx) {
                v.pass = false;
                std::ostringstream os;
                os << "message " << msg_id << " sent after the sender's checkpoint "
                   << "but received before the receiver's";
                v.detail = os.str();
                v.counterexample_events = {m.send_idx, *m.recv_idx};
                return v;
            }
        }
    }
    return v;
}

Verdict check_phase2_safety(const EventLog& log) {
    Verdict v{"phase2_safety"};
    std::map<NodeId, int> enter_round, exit_round;
    std::map<NodeId, std::set<NodeId>> adj;
    for (const Event& ev : log.events) {
        if (ev.type == EventType::Phase2Enter)
            enter_round.try_emplace(ev.node, ev.round);
        if (ev.type == EventType::Phase2Exit)
            exit_round.try_emplace(ev.node, ev.round);
        if (ev.type == EventType::Receive && ev.kind == Kind::Ack) {
            adj[ev.node].insert(ev.peer);
            adj[ev.peer].insert(ev.node);
        }
    }
    std::set<NodeId> unvisited;
    for (const auto& [node, r] : enter_round) unvisited.insert(node);
    while (!unvisited.empty()) {
        NodeId start = *unvisited.begin();
        std::vector<NodeId> component;
        std::queue<NodeId> bfs;
        bfs.push(start);
        unvisited.erase(start);
        while (!bfs.empty()) {
            NodeId u = bfs.front();
            bfs.pop();
            component.push_back(u);
            for (NodeId w : adj[u])
                if (unvisited.erase(w)) bfs.push(w);
        }
        int max_enter = 0, min_exit = 1 << 30;
        NodeId late = -1, early = -1;
        for (NodeId u : component) {
            if (!enter_round.count(u) || !exit_round.count(u)) {
                v.pass = false;
                v.detail = "initiator missing enter/exit in component";
                return v;
            }
            if (enter_round[u] > max_enter) { max_enter = enter_round[u]; late = u; }
            if (exit_round[u] < min_exit) { min_exit = exit_round[u]; early = u; }
        }
        if (min_exit < max_enter) {
            v.pass = false;
            std::ostringstream os;
            os << "initiator " << early << " left phase 2 in round " << min_exit
               << " before initiator " << late << " entered in round " << max_enter;
            v.detail = os.str();
            return v;
        }
    }
    return v;
}

Verdict check_rollback(const EventLog& log) {
    Verdict v{"rollback_restoration"};
    auto committed = committed_checkpoints(log);
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const Event& ev = log.events[i];
        if (ev.type != EventType::RollbackRestored) continue;
        NodeId j = ev.node;

        std::shared_ptr<const CheckpointRecord> record;
        std::size_t rec_idx = 0, term_idx = 0;
        auto it = committed.find(j);
        if (it != committed.end()) {
            for (const CommittedCheckpoint& c : it->second) {
                if (c.term_idx < i) {
                    record = c.record;
                    rec_idx = c.rec_idx;
                    term_idx = c.term_idx;
                }
            }
        }
        std::uint64_t expected_state = record ? record->local_state : 0;
        if (ev.restored_state != expected_state) {
            v.pass = false;
            v.detail = "restored state differs from the checkpoint at node " +
                       std::to_string(j);
            v.counterexample_events = {i};
            return v;
        }

        // wait list of the rollback group, read off the wire
        std::set<NodeId> rb_list;
        bool have_rb_fin = false;
        for (std::size_t k = 0; k < i; ++k) {
            const Event& e = log.events[k];
            if (e.type == EventType::Receive && e.kind == Kind::RbFin &&
                e.node == j) {
                rb_list.clear();
                rb_list.insert(e.ids.begin(), e.ids.end());
                have_rb_fin = true;
            }
        }
        if (!have_rb_fin) {
            // the rollback initiator's own wait list never crosses a link;
            // reconstruct it from the RbMyDS reports it received
            for (std::size_t k = 0; k < i; ++k) {
                const Event& e = log.events[k];
                if (e.type == EventType::Receive && e.kind == Kind::RbMyDS &&
                    e.node == j &&
                    std::find(e.ids.begin(), e.ids.end(), j) != e.ids.end())
                    rb_list.insert(e.peer);
            }
        }

        std::vector<InTransitMsg> expected;
        std::set<std::uint64_t> in_record;
        if (record) {
            for (const InTransitMsg& m : record->in_transit) {
                expected.push_back(m);
                in_record.insert(m.msg_id);
            }
        }
        if (record) {
            for (std::size_t k = rec_idx; k < term_idx; ++k) {
                const Event& e = log.events[k];
                if (e.type != EventType::Receive || e.kind != Kind::App ||
                    e.node != j)
                    continue;
                if (in_record.count(e.msg_id)) continue;
                // queued only if no marker from that sender had arrived yet
                bool marker_seen = false;
                for (std::size_t t = rec_idx > 0 ? rec_idx - 1 : 0; t < k; ++t) {
                    const Event& me = log.events[t];
                    if (me.type == EventType::Receive && me.kind == Kind::Marker &&
                        me.node == j && me.peer == e.peer) {
                        marker_seen = true;
                        break;
                    }
                }
                if (marker_seen) continue;
                if (!rb_list.count(e.peer))
                    expected.push_back({e.peer, e.msg_id});
            }
        }
        if (expected != ev.restored_links) {
            v.pass = false;
            v.detail = "restored link contents differ from the checkpoint at node " +
                       std::to_string(j);
            v.counterexample_events = {i};
            return v;
        }
    }
    return v;
}

VerdictReport check_all(const EventLog& log, int n) {
    VerdictReport report;
    report.checks.push_back(validate_log(log));
    report.checks.push_back(check_checkpoint_concurrency(log, n));
    report.checks.push_back(check_in_transit(log, n));
    report.checks.push_back(check_orphans(log, n));
    bool phase2 = false, rollback = false;
    for (const Event& ev : log.events) {
        phase2 |= ev.type == EventType::Phase2Enter;
        rollback |= ev.type == EventType::RollbackRestored;
    }
    if (phase2) report.checks.push_back(check_phase2_safety(log));
    if (rollback) report.checks.push_back(check_rollback(log));
    return report;
}

}  // namespace psnap
