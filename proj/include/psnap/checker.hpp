#pragma once

#include <stdexcept>
#include <string>

#include "psnap/event_log.hpp"

namespace psnap {

struct MalformedLog : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Verdict {
    std::string name;
    bool pass = true;
    std::string detail;
    std::vector<std::size_t> counterexample_events;  // indices into the log
};

struct VerdictReport {
    std::vector<Verdict> checks;
    bool all_pass() const;
    std::string to_json() const;
};

using VectorClock = std::vector<std::uint32_t>;

/// Structural sanity of a trace: every receive matches an earlier send on the
/// same link, each envelope is delivered at most once, per-link order is FIFO
/// and delivery is never in the sending round. Receives that follow a rollback
/// restoration replay old messages and are exempt.
Verdict validate_log(const EventLog& log);

/// Causal clocks over the computation: events of one node are ordered by
/// appearance and application messages order their send before their receive.
/// Control traffic carries no causal edge, mirroring the usual treatment of
/// snapshot consistency. Throws MalformedLog on a receive without a send.
std::vector<VectorClock> assign_clocks(const EventLog& log, int n);

// Each check inspects only the trace, not protocol internals.
Verdict check_checkpoint_concurrency(const EventLog& log, int n);
Verdict check_in_transit(const EventLog& log, int n);
Verdict check_orphans(const EventLog& log, int n);
Verdict check_phase2_safety(const EventLog& log);
Verdict check_rollback(const EventLog& log);

/// Runs every check applicable to the trace.
VerdictReport check_all(const EventLog& log, int n);

}  // namespace psnap
