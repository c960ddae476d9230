#pragma once

#include <cstdint>
#include <vector>

#include "cesim/rng.hpp"

namespace cesim {

enum class Role { Worker, Candidate, Coordinator };
const char* to_string(Role r);

struct ConsensusConfig {
    double heartbeat_interval_ms = 50.0;
    double heartbeat_timeout_ms = 150.0;   // silence before candidacy
    double candidate_wait_min_ms = 150.0;  // randomized pause before soliciting votes
    double candidate_wait_max_ms = 300.0;
    double vote_window_ms = 150.0;         // how long a candidacy waits for a majority
};

enum class MsgType { Heartbeat, VoteRequest, VoteGrant, CoordinatorAnnounce };
const char* to_string(MsgType t);

struct ConsensusMsg {
    MsgType type = MsgType::Heartbeat;
    int from = -1;
    int to = -1;
    std::uint64_t term = 0;
};

enum class TimerKind { HeartbeatDue, HeartbeatDeadline, CandidateBroadcast, VoteDeadline };

struct TimerRequest {
    TimerKind kind = TimerKind::HeartbeatDue;
    double delay_ms = 0.0;
    std::uint64_t generation = 0;  // echoes back; stale timers are ignored
};

// What the host (simulation engine) must do after feeding one input.
struct ConsensusActions {
    std::vector<ConsensusMsg> outbox;
    std::vector<TimerRequest> timers;
    bool role_changed = false;
};

// Heartbeat-lease coordinator election in the Raft style: monotone terms,
// at most one vote per (node, term), majority promotion, explicit
// coordinator announcement. One instance per simulated node; the host owns
// delivery (with network latency), timers, and crash gating. Votes count
// against the full membership, so a partitioned minority can never elect.
class ConsensusNode {
public:
    ConsensusNode(int id, std::vector<int> peer_ids, const ConsensusConfig& cfg,
                  bool initial_coordinator, std::uint64_t seed);

    int id() const { return id_; }
    Role role() const { return role_; }
    std::uint64_t term() const { return term_; }
    int coordinator() const { return coordinator_; }  // -1 while unknown
    std::uint64_t generation() const { return generation_; }

    ConsensusActions on_start();
    ConsensusActions on_timer(TimerKind kind, std::uint64_t generation);
    ConsensusActions on_message(const ConsensusMsg& msg);
    // Recovery rejoins as a plain worker; term and vote book survive so the
    // node can never double-vote in a term it already voted in.
    ConsensusActions on_recover();

private:
    ConsensusActions become_candidate();
    void arm_deadline(ConsensusActions& a);

    int id_;
    std::vector<int> peers_;  // everyone else in the membership
    ConsensusConfig cfg_;
    Rng rng_;
    Role role_ = Role::Worker;
    std::uint64_t term_ = 1;
    int coordinator_ = -1;
    std::uint64_t voted_term_ = 0;  // highest term we voted in
    int voted_for_ = -1;
    int votes_ = 0;
    std::uint64_t generation_ = 0;
};

}  // namespace cesim
