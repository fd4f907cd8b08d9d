#pragma once

#include <random>
#include <string>

#include "psnap/event_log.hpp"
#include "psnap/protocol.hpp"

namespace psnap {

enum class Algorithm { Cps, Css };

std::string_view algorithm_name(Algorithm a);

struct WorkloadConfig {
    bool enabled = false;
    double send_prob = 0.0;  // per node per round
    int first_round = 1;
    int last_round = 0;
};

/// Light application traffic over the first 30 rounds, used whenever a
/// scenario only says "workload on".
WorkloadConfig standard_workload();

struct Scenario {
    int n = 0;
    double comm_prob = 0.0;
    double init_prob = 0.0;
    std::uint64_t seed = 0;
    WorkloadConfig workload;
    // explicit topology / initiator set instead of random generation
    std::optional<std::vector<std::pair<int, int>>> topology;
    std::optional<std::vector<int>> initiators;

    std::string to_json() const;
    static Scenario from_json(const std::string& text);
};

struct RunMetrics {
    long total_messages = 0;
    long marker_msgs = 0;
    long normal_msgs = 0;
    long collision_msgs = 0;
    long initnet_msgs = 0;
    long app_msgs = 0;
    long total_rounds = 0;
    long collisions = 0;
    int group_count = 0;
    int initnet_size = 0;
    std::vector<long> per_node_processed;
};

struct RunOptions {
    long round_cap = 1'000'000;
    // when set, a rollback is initiated at `rollback_initiator` once the
    // snapshot has completed and the network is quiet
    bool rollback = false;
    int rollback_initiator = 0;
};

struct RunResult {
    EventLog log;
    RunMetrics metrics;
    bool round_limit_exceeded = false;
    bool clean_completion = true;  // no node left mid-instance at the end
    std::vector<std::uint64_t> final_app_states;
    std::vector<std::optional<CheckpointRecord>> checkpoints;
    std::vector<int> css_parent;     // CSS main/sub tree, -1 at roots/non-initiators
    std::vector<char> initiated;
};

/// Symmetric communication relation: each unordered pair is related with
/// probability comm_prob, and both endpoints start with the other in their
/// dependency set.
std::vector<std::pair<int, int>> generate_relation(int n, double comm_prob,
                                                   std::mt19937_64& rng);
/// Each node independently becomes an initiator with probability init_prob.
std::vector<int> pick_initiators(int n, double init_prob, std::mt19937_64& rng);

RunResult run(const Scenario& scenario, Algorithm algorithm,
              const RunOptions& options = {});

/// Diameter of the virtual-link graph (largest component) for the concurrent
/// algorithm; depth of the main/sub tree for the baseline.
int initiator_network_size(Algorithm algorithm, const RunResult& result);

/// Fraction of all processed messages handled by the k busiest nodes.
double top_k_load(const RunMetrics& metrics, int k);

}  // namespace psnap
