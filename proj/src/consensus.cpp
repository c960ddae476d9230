#include "cesim/consensus.hpp"

namespace cesim {

const char* to_string(Role r) {
    switch (r) {
        case Role::Worker: return "worker";
        case Role::Candidate: return "candidate";
        case Role::Coordinator: return "coordinator";
    }
    return "?";
}

const char* to_string(MsgType t) {
    switch (t) {
        case MsgType::Heartbeat: return "heartbeat";
        case MsgType::VoteRequest: return "vote_request";
        case MsgType::VoteGrant: return "vote_grant";
        case MsgType::CoordinatorAnnounce: return "announce";
    }
    return "?";
}

ConsensusNode::ConsensusNode(int id, std::vector<int> peer_ids,
                             const ConsensusConfig& cfg,
                             bool initial_coordinator, std::uint64_t seed)
    : id_(id),
      peers_(std::move(peer_ids)),
      cfg_(cfg),
      rng_(Rng::sub(seed, 0x636f6e73ULL + static_cast<std::uint64_t>(id))) {
    if (initial_coordinator) {
        role_ = Role::Coordinator;
        coordinator_ = id_;
    }
}

void ConsensusNode::arm_deadline(ConsensusActions& a) {
    ++generation_;
    a.timers.push_back({TimerKind::HeartbeatDeadline, cfg_.heartbeat_timeout_ms,
                        generation_});
}

ConsensusActions ConsensusNode::on_start() {
    ConsensusActions a;
    if (role_ == Role::Coordinator) {
        ++generation_;
        for (int peer : peers_)
            a.outbox.push_back({MsgType::Heartbeat, id_, peer, term_});
        a.timers.push_back({TimerKind::HeartbeatDue, cfg_.heartbeat_interval_ms,
                            generation_});
    } else {
        coordinator_ = -1;  // learned from the first heartbeat/announce
        arm_deadline(a);
    }
    return a;
}

ConsensusActions ConsensusNode::become_candidate() {
    ConsensusActions a;
    role_ = Role::Candidate;
    ++term_;
    voted_term_ = term_;
    voted_for_ = id_;
    votes_ = 1;  // own vote
    coordinator_ = -1;
    a.role_changed = true;
    ++generation_;
    a.timers.push_back({TimerKind::CandidateBroadcast,
                        rng_.uniform(cfg_.candidate_wait_min_ms, cfg_.candidate_wait_max_ms),
                        generation_});
    return a;
}

ConsensusActions ConsensusNode::on_timer(TimerKind kind, std::uint64_t generation) {
    ConsensusActions a;
    if (generation != generation_) return a;  // reset/stale timer
    switch (kind) {
        case TimerKind::HeartbeatDue:
            if (role_ == Role::Coordinator) {
                for (int peer : peers_)
                    a.outbox.push_back({MsgType::Heartbeat, id_, peer, term_});
                a.timers.push_back({TimerKind::HeartbeatDue,
                                    cfg_.heartbeat_interval_ms, generation_});
            }
            break;
        case TimerKind::HeartbeatDeadline:
            if (role_ != Role::Coordinator) return become_candidate();
            break;
        case TimerKind::CandidateBroadcast:
            if (role_ == Role::Candidate) {
                for (int peer : peers_)
                    a.outbox.push_back({MsgType::VoteRequest, id_, peer, term_});
                a.timers.push_back({TimerKind::VoteDeadline, cfg_.vote_window_ms,
                                    generation_});
            }
            break;
        case TimerKind::VoteDeadline:
            // nobody won this round (e.g. split vote): run again in a new term
            if (role_ == Role::Candidate) return become_candidate();
            break;
    }
    return a;
}

ConsensusActions ConsensusNode::on_message(const ConsensusMsg& msg) {
    ConsensusActions a;
    if (msg.term > term_) {
        term_ = msg.term;
        if (role_ != Role::Worker) {
            role_ = Role::Worker;
            a.role_changed = true;
        }
        coordinator_ = -1;
    }
    switch (msg.type) {
        case MsgType::Heartbeat:
        case MsgType::CoordinatorAnnounce:
            if (msg.term == term_) {
                if (role_ != Role::Worker && msg.from != id_) {
                    role_ = Role::Worker;  // someone else leads this term
                    a.role_changed = true;
                }
                coordinator_ = msg.from;
                arm_deadline(a);
            }
            break;
        case MsgType::VoteRequest:
            if (msg.term == term_ && role_ == Role::Worker &&
                (voted_term_ < term_ || (voted_term_ == term_ && voted_for_ == msg.from))) {
                voted_term_ = term_;
                voted_for_ = msg.from;
                a.outbox.push_back({MsgType::VoteGrant, id_, msg.from, term_});
                arm_deadline(a);  // granting extends patience with the electorate
            }
            break;
        case MsgType::VoteGrant:
            if (msg.term == term_ && role_ == Role::Candidate) {
                ++votes_;
                const int n_nodes = static_cast<int>(peers_.size()) + 1;
                if (votes_ >= n_nodes / 2 + 1) {
                    role_ = Role::Coordinator;
                    coordinator_ = id_;
                    a.role_changed = true;
                    ++generation_;
                    for (int peer : peers_)
                        a.outbox.push_back(
                            {MsgType::CoordinatorAnnounce, id_, peer, term_});
                    a.timers.push_back({TimerKind::HeartbeatDue,
                                        cfg_.heartbeat_interval_ms, generation_});
                }
            }
            break;
    }
    return a;
}

ConsensusActions ConsensusNode::on_recover() {
    ConsensusActions a;
    if (role_ != Role::Worker) {
        role_ = Role::Worker;
        a.role_changed = true;
    }
    coordinator_ = -1;
    votes_ = 0;
    arm_deadline(a);
    return a;
}

}  // namespace cesim
