#include "psnap/sim.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <numeric>
#include <queue>

#include <json.hpp>

#include "psnap/cps_node.hpp"
#include "psnap/css_node.hpp"

namespace psnap {

using nlohmann::json;

std::string_view algorithm_name(Algorithm a) {
    return a == Algorithm::Cps ? "cps" : "css";
}

WorkloadConfig standard_workload() {
    WorkloadConfig w;
    w.enabled = true;
    w.send_prob = 0.2;
    w.first_round = 1;
    w.last_round = 30;
    return w;
}

namespace {

double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// decoupled from the round count so the workload schedule is identical for
// both algorithms on the same scenario
std::uint64_t workload_hash(std::uint64_t seed, int round, int node, int salt) {
    return splitmix(splitmix(seed ^ (0xda3e39cb94b95bdbull * (round + 1))) ^
                    (0x9e3779b97f4a7c15ull * (node + 1)) ^
                    (0xbf58476d1ce4e5b9ull * (salt + 1)));
}

}  // namespace

std::vector<std::pair<int, int>> generate_relation(int n, double comm_prob,
                                                   std::mt19937_64& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (unit_draw(rng) < comm_prob) edges.emplace_back(i, j);
    return edges;
}

std::vector<int> pick_initiators(int n, double init_prob, std::mt19937_64& rng) {
    std::vector<int> initiators;
    for (int i = 0; i < n; ++i)
        if (unit_draw(rng) < init_prob) initiators.push_back(i);
    return initiators;
}

std::string Scenario::to_json() const {
    json j;
    j["n"] = n;
    j["comm_prob"] = comm_prob;
    j["init_prob"] = init_prob;
    j["seed"] = seed;
    j["workload"] = {{"enabled", workload.enabled},
                     {"send_prob", workload.send_prob},
                     {"first_round", workload.first_round},
                     {"last_round", workload.last_round}};
    if (topology) {
        json edges = json::array();
        for (auto [a, b] : *topology) edges.push_back(json::array({a, b}));
        j["topology_override"] = std::move(edges);
    }
    if (initiators) j["initiators_override"] = *initiators;
    return j.dump();
}

Scenario Scenario::from_json(const std::string& text) {
    json j = json::parse(text);
    Scenario s;
    s.n = j.at("n").get<int>();
    s.comm_prob = j.value("comm_prob", 0.0);
    s.init_prob = j.value("init_prob", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("workload")) {
        const json& w = j["workload"];
        s.workload.enabled = w.value("enabled", false);
        s.workload.send_prob = w.value("send_prob", 0.0);
        s.workload.first_round = w.value("first_round", 1);
        s.workload.last_round = w.value("last_round", 0);
    }
    if (j.contains("topology_override")) {
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : j["topology_override"])
            edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        s.topology = std::move(edges);
    }
    if (j.contains("initiators_override"))
        s.initiators = j["initiators_override"].get<std::vector<int>>();
    return s;
}

namespace {

struct Scheduler {
    const Scenario& scenario;
    const RunOptions& options;
    RunResult& result;
    std::vector<std::unique_ptr<NodeBase>> nodes;
    std::vector<std::vector<int>> neighbours;  // fixed topology adjacency
    std::map<std::pair<int, int>, std::deque<Envelope>> links;
    std::uint64_t env_seq = 0;
    std::uint64_t app_seq = 0;
    int round = 0;
    long last_activity = 0;

    Scheduler(const Scenario& sc, const RunOptions& opt, RunResult& res)
        : scenario(sc), options(opt), result(res) {}

    void enqueue(NodeId origin, std::vector<Envelope> emissions) {
        for (Envelope& e : emissions) {
            e.sent_round = round;
            e.env_id = ++env_seq;
            if (e.from == origin) {
                result.log.send(e);
                result.metrics.total_messages += 1;
                switch (classify(e.kind, e.forwarded)) {
                    case Category::Marker: result.metrics.marker_msgs += 1; break;
                    case Category::Normal: result.metrics.normal_msgs += 1; break;
                    case Category::Collision:
                        result.metrics.collision_msgs += 1;
                        break;
                    case Category::InitiatorNetwork:
                        result.metrics.initnet_msgs += 1;
                        break;
                    case Category::Application: result.metrics.app_msgs += 1; break;
                }
            }
            // envelopes with from != origin are rollback link re-injections:
            // they go back onto the link without counting as new sends
            last_activity = round;
            links[{e.from, e.to}].push_back(std::move(e));
        }
    }

    void deliver_round() {
        std::map<NodeId, std::vector<Envelope>> inbox;
        for (auto& [key, q] : links) {
            auto& dest = inbox[key.second];
            for (Envelope& e : q) dest.push_back(std::move(e));
            q.clear();
        }
        links.clear();
        for (auto& [to, envs] : inbox) {
            for (const Envelope& e : envs) {
                result.log.receive(e);
                result.metrics.per_node_processed[to] += 1;
                if (e.kind == Kind::NewInit && !e.forwarded)
                    result.metrics.collisions += 1;
                last_activity = round;
                enqueue(to, nodes[to]->deliver(e));
            }
        }
    }

    void workload_round() {
        const WorkloadConfig& w = scenario.workload;
        if (!w.enabled || round < w.first_round || round > w.last_round) return;
        for (int i = 0; i < scenario.n; ++i) {
            if (neighbours[i].empty() || nodes[i]->app_paused()) continue;
            double p = static_cast<double>(
                           workload_hash(scenario.seed, round, i, 0) >> 11) *
                       0x1.0p-53;
            if (p >= w.send_prob) continue;
            std::uint64_t pick = workload_hash(scenario.seed, round, i, 1);
            NodeId dest = neighbours[i][pick % neighbours[i].size()];
            enqueue(i, nodes[i]->send_app(dest, ++app_seq));
        }
    }

    bool quiet() const {
        for (const auto& [key, q] : links)
            if (!q.empty()) return false;
        const WorkloadConfig& w = scenario.workload;
        if (w.enabled && round < w.last_round) return false;
        return true;
    }
};

}  // namespace

RunResult run(const Scenario& scenario, Algorithm algorithm,
              const RunOptions& options) {
    RunResult result;
    result.metrics.per_node_processed.assign(scenario.n, 0);

    std::mt19937_64 rng(scenario.seed);
    std::vector<std::pair<int, int>> edges =
        scenario.topology ? *scenario.topology
                          : generate_relation(scenario.n, scenario.comm_prob, rng);
    std::vector<int> initiators =
        scenario.initiators ? *scenario.initiators
                            : pick_initiators(scenario.n, scenario.init_prob, rng);
    result.metrics.group_count = static_cast<int>(initiators.size());

    Scheduler sched(scenario, options, result);
    sched.neighbours.assign(scenario.n, {});
    std::vector<std::set<NodeId>> ds(scenario.n);
    for (auto [a, b] : edges) {
        sched.neighbours[a].push_back(b);
        sched.neighbours[b].push_back(a);
        ds[a].insert(b);
        ds[b].insert(a);
    }
    for (auto& nb : sched.neighbours) std::sort(nb.begin(), nb.end());

    std::vector<CpsNode*> cps_nodes;
    std::vector<CssNode*> css_nodes;
    for (int i = 0; i < scenario.n; ++i) {
        std::unique_ptr<NodeBase> node;
        if (algorithm == Algorithm::Cps) {
            auto p = std::make_unique<CpsNode>(i, &result.log);
            cps_nodes.push_back(p.get());
            node = std::move(p);
        } else {
            auto p = std::make_unique<CssNode>(i, &result.log);
            css_nodes.push_back(p.get());
            node = std::move(p);
        }
        node->set_initial_ds(ds[i]);
        sched.nodes.push_back(std::move(node));
    }

    bool rollback_started = false;
    for (sched.round = 1; sched.round <= options.round_cap; ++sched.round) {
        result.log.current_round = sched.round;
        sched.deliver_round();
        if (sched.round == 1)
            for (int init : initiators)
                sched.enqueue(init, sched.nodes[init]->start_snapshot(1));
        sched.workload_round();
        if (sched.quiet()) {
            if (options.rollback && !rollback_started) {
                rollback_started = true;
                NodeId r = options.rollback_initiator;
                sched.enqueue(r, sched.nodes[r]->start_rollback(1));
                if (sched.quiet()) break;
            } else {
                break;
            }
        }
        if (sched.round == options.round_cap) result.round_limit_exceeded = true;
    }

    result.metrics.total_rounds = sched.last_activity;
    result.initiated.assign(scenario.n, 0);
    for (int i : initiators) result.initiated[i] = 1;
    result.css_parent.assign(scenario.n, -1);
    for (int i = 0; i < scenario.n; ++i) {
        NodeBase* node = sched.nodes[i].get();
        result.final_app_states.push_back(node->app_state());
        result.checkpoints.push_back(node->latest_checkpoint());
        if (node->snapshot_active()) result.clean_completion = false;
        if (algorithm == Algorithm::Cps && cps_nodes[i]->rollback_active())
            result.clean_completion = false;
        if (algorithm == Algorithm::Css && css_nodes[i]->initiated())
            result.css_parent[i] = css_nodes[i]->parent();
    }
    result.metrics.initnet_size = initiator_network_size(algorithm, result);
    return result;
}

int initiator_network_size(Algorithm algorithm, const RunResult& result) {
    if (algorithm == Algorithm::Css) {
        // depth of the deepest main/sub tree
        int depth = 0;
        for (int i = 0; i < static_cast<int>(result.css_parent.size()); ++i) {
            if (!result.initiated[i]) continue;
            int d = 0;
            int cur = i;
            while (result.css_parent[cur] != -1 && d <= static_cast<int>(result.css_parent.size())) {
                cur = result.css_parent[cur];
                ++d;
            }
            depth = std::max(depth, d);
        }
        return depth;
    }
    // diameter of the virtual-link network built from delivered Ack messages
    std::set<NodeId> vertices;
    std::map<NodeId, std::set<NodeId>> adj;
    for (const Event& ev : result.log.events) {
        if (ev.type == EventType::Phase2Enter) vertices.insert(ev.node);
        if (ev.type == EventType::Receive && ev.kind == Kind::Ack) {
            vertices.insert(ev.node);
            vertices.insert(ev.peer);
            adj[ev.node].insert(ev.peer);
            adj[ev.peer].insert(ev.node);
        }
    }
    int diameter = 0;
    for (NodeId s : vertices) {
        std::map<NodeId, int> dist{{s, 0}};
        std::queue<NodeId> bfs;
        bfs.push(s);
        while (!bfs.empty()) {
            NodeId u = bfs.front();
            bfs.pop();
            for (NodeId v : adj[u])
                if (!dist.count(v)) {
                    dist[v] = dist[u] + 1;
                    diameter = std::max(diameter, dist[v]);
                    bfs.push(v);
                }
        }
    }
    return diameter;
}

double top_k_load(const RunMetrics& metrics, int k) {
    long total = std::accumulate(metrics.per_node_processed.begin(),
                                 metrics.per_node_processed.end(), 0L);
    if (total == 0) return 0.0;
    std::vector<long> sorted = metrics.per_node_processed;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    long top = 0;
    for (int i = 0; i < k && i < static_cast<int>(sorted.size()); ++i)
        top += sorted[i];
    return static_cast<double>(top) / static_cast<double>(total);
}

}  // namespace psnap
