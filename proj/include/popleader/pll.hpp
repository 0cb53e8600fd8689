#pragma once

// Logarithmic-time, logarithmic-space leader election.
//
// Every agent carries the common variables (leader, tick, status, epoch,
// init, color) and one group-specific block selected by (status, epoch):
//
//   status X                -> nothing
//   status B                -> Timer      { count }
//   status A, epoch 1       -> QuickVars  { level, done }
//   status A, epoch 2 or 3  -> TournVars  { rand, index }
//   status A, epoch 4       -> BackupVars { level }
//
// One interaction runs, in order: status assignment, tick reset, CountUp,
// epoch bump for agents that ticked, epoch merge, group re-initialisation,
// then exactly one of QuickElimination / Tournament / BackUp selected by the
// (now shared) epoch. All bounded increments saturate at their cap.

#include "popleader/engine.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace popleader::pll {

struct Params {
    int m = 2;
    int level_max = 10;   // 5m, cap of level_q and level_b
    int count_max = 82;   // 41m, timer period
    int phi = 1;          // ceil((2/3) lg m), nonce bits per tournament

    friend constexpr bool operator==(const Params&, const Params&) = default;
};

/// Smallest k with (2/3) lg m <= k, i.e. m^2 <= 8^k. Exact in integers.
constexpr int nonce_bits(int m) noexcept
{
    const auto square = static_cast<unsigned long long>(m) * static_cast<unsigned long long>(m);
    int k = 0;
    unsigned long long power = 1;
    while (power < square) {
        power *= 8;
        ++k;
    }
    return k;
}

inline Params params_from_m(int m)
{
    if (m < 2) {
        throw InvalidParameter("m must be at least 2, got " + std::to_string(m));
    }
    if (m > 100000) {
        throw InvalidParameter("m is unreasonably large: " + std::to_string(m));
    }
    return Params{m, 5 * m, 41 * m, nonce_bits(m)};
}

/// max(2, ceil(log2 n)).
constexpr int default_m(std::size_t n) noexcept { return std::max(2, ceil_log2(n)); }

enum class Status : std::uint8_t { X, A, B };

struct CommonVars {
    bool leader = true;
    bool tick = false;
    Status status = Status::X;
    std::uint8_t epoch = 1;
    std::uint8_t init = 1;
    std::uint8_t color = 0;

    friend constexpr bool operator==(const CommonVars&, const CommonVars&) = default;
};

struct NoExtra {
    friend constexpr bool operator==(NoExtra, NoExtra) = default;
};
struct Timer {
    std::uint32_t count = 0;
    friend constexpr bool operator==(Timer, Timer) = default;
};
struct QuickVars {
    std::uint32_t level = 0;
    bool done = false;
    friend constexpr bool operator==(QuickVars, QuickVars) = default;
};
struct TournVars {
    std::uint32_t rand = 0;
    std::uint32_t index = 0;
    friend constexpr bool operator==(TournVars, TournVars) = default;
};
struct BackupVars {
    std::uint32_t level = 0;
    friend constexpr bool operator==(BackupVars, BackupVars) = default;
};

using GroupVars = std::variant<NoExtra, Timer, QuickVars, TournVars, BackupVars>;

struct State {
    CommonVars common;
    GroupVars group;

    friend bool operator==(const State&, const State&) = default;
};

inline State initial_state() { return State{}; }

constexpr bool is_leader(const State& s) noexcept { return s.common.leader; }
constexpr bool is_follower(const State& s) noexcept { return !s.common.leader; }
constexpr bool is_candidate(const State& s) noexcept { return s.common.status == Status::A; }
constexpr bool is_timer(const State& s) noexcept { return s.common.status == Status::B; }
constexpr int epoch(const State& s) noexcept { return s.common.epoch; }
constexpr const State& core(const State& s) noexcept { return s; }

inline Output output(const State& s) noexcept { return s.common.leader ? Output::Leader : Output::Follower; }

/// The (status, epoch) <-> group correspondence plus every domain bound.
inline bool is_consistent(const State& s, const Params& p)
{
    const auto& c = s.common;
    if (c.epoch < 1 || c.epoch > 4 || c.init < 1 || c.init > c.epoch || c.color > 2) {
        return false;
    }
    switch (c.status) {
    case Status::X:
        return c.epoch == 1 && std::holds_alternative<NoExtra>(s.group);
    case Status::B: {
        const auto* t = std::get_if<Timer>(&s.group);
        return t != nullptr && !c.leader && t->count < static_cast<std::uint32_t>(p.count_max);
    }
    case Status::A:
        if (c.epoch == 1) {
            const auto* q = std::get_if<QuickVars>(&s.group);
            return q != nullptr && q->level <= static_cast<std::uint32_t>(p.level_max);
        }
        if (c.epoch == 4) {
            const auto* b = std::get_if<BackupVars>(&s.group);
            return b != nullptr && b->level <= static_cast<std::uint32_t>(p.level_max);
        }
        {
            const auto* t = std::get_if<TournVars>(&s.group);
            return t != nullptr && t->index <= static_cast<std::uint32_t>(p.phi) &&
                   t->rand < (1U << p.phi);
        }
    }
    return false;
}

inline std::uint32_t bump(std::uint32_t value, int cap) noexcept
{
    return std::min<std::uint32_t>(value + 1, static_cast<std::uint32_t>(cap));
}

// ---- Status assignment ---------------------------------------------------

inline void make_candidate(State& s, bool leader, bool done)
{
    s.common.status = Status::A;
    s.common.leader = leader;
    s.group = QuickVars{0, done};
}

inline void make_timer(State& s)
{
    s.common.status = Status::B;
    s.common.leader = false;
    s.group = Timer{0};
}

inline void assign_status(State& a0, State& a1)
{
    const bool x0 = a0.common.status == Status::X;
    const bool x1 = a1.common.status == Status::X;
    if (x0 && x1) {
        make_candidate(a0, true, false);
        make_timer(a1);
    } else if (x0 != x1) {
        make_candidate(x0 ? a0 : a1, false, true);
    }
}

// ---- CountUp ---------------------------------------------------------------

inline void count_up(State& a0, State& a1, const Params& p)
{
    for (State* a : {&a0, &a1}) {
        if (auto* t = std::get_if<Timer>(&a->group); t != nullptr && is_timer(*a)) {
            t->count = (t->count + 1) % static_cast<std::uint32_t>(p.count_max);
            if (t->count == 0) {
                a->common.color = static_cast<std::uint8_t>((a->common.color + 1) % 3);
                a->common.tick = true;
            }
        }
    }
    // At most one side can be exactly one color behind the other.
    State* pair[2] = {&a0, &a1};
    for (int i = 0; i < 2; ++i) {
        State& behind = *pair[i];
        const State& ahead = *pair[1 - i];
        if (ahead.common.color == (behind.common.color + 1) % 3) {
            behind.common.color = ahead.common.color;
            behind.common.tick = true;
            if (auto* t = std::get_if<Timer>(&behind.group); t != nullptr && is_timer(behind)) {
                t->count = 0;
            }
            break;
        }
    }
}

/// Epoch bump for agents that ticked, merge to the pair's maximum, then
/// group re-initialisation for agents whose epoch moved past `init`.
///
/// A follower entering a tournament epoch starts with index = phi: it never
/// draws nonce bits, and the nonce maximum can only travel through agents
/// whose index is phi. Starting it at 0 would confine the spread to direct
/// leader-leader meetings.
inline void advance_epochs(State& a0, State& a1, const Params& p)
{
    for (State* a : {&a0, &a1}) {
        if (a->common.tick) {
            a->common.epoch = static_cast<std::uint8_t>(std::min(a->common.epoch + 1, 4));
        }
    }
    const auto shared = std::max(a0.common.epoch, a1.common.epoch);
    a0.common.epoch = a1.common.epoch = shared;
    for (State* a : {&a0, &a1}) {
        auto& c = a->common;
        if (c.epoch > c.init) {
            if (c.status == Status::A && (c.epoch == 2 || c.epoch == 3)) {
                a->group = TournVars{0, c.leader ? 0U : static_cast<std::uint32_t>(p.phi)};
            } else if (c.status == Status::A && c.epoch == 4) {
                a->group = BackupVars{0};
            }
            c.init = c.epoch;
        }
    }
}

// ---- QuickElimination (epoch 1) -------------------------------------------

/// The larger level spreads among done candidates; the lower side is demoted.
inline void spread_quick_level(State& a0, State& a1)
{
    if (!is_candidate(a0) || !is_candidate(a1)) {
        return;
    }
    auto& q0 = std::get<QuickVars>(a0.group);
    auto& q1 = std::get<QuickVars>(a1.group);
    if (!q0.done || !q1.done || q0.level == q1.level) {
        return;
    }
    State& lower = q0.level < q1.level ? a0 : a1;
    const std::uint32_t higher = std::max(q0.level, q1.level);
    lower.common.leader = false;
    std::get<QuickVars>(lower.group).level = higher;
}

/// A flipping leader that meets a follower: heads when it is the initiator.
inline void quick_elimination(State& a0, State& a1, const Params& p)
{
    State* pair[2] = {&a0, &a1};
    for (int i = 0; i < 2; ++i) {
        State& self = *pair[i];
        if (is_leader(self) && is_follower(*pair[1 - i])) {
            auto& q = std::get<QuickVars>(self.group);
            if (!q.done) {
                if (i == 0) {
                    q.level = bump(q.level, p.level_max);
                } else {
                    q.done = true;
                }
            }
            break;
        }
    }
    spread_quick_level(a0, a1);
}

// ---- Tournament (epochs 2 and 3) ------------------------------------------

// Reachable states keep rand < 2^index, so the mask only matters for
// enumerated states that no execution produces; it keeps rand in its domain.
inline void append_nonce_bit(TournVars& t, std::uint32_t bit, const Params& p)
{
    t.rand = (2 * t.rand + bit) & ((1U << p.phi) - 1U);
    t.index = bump(t.index, p.phi);
}

inline void spread_nonce(State& a0, State& a1, const Params& p)
{
    if (!is_candidate(a0) || !is_candidate(a1)) {
        return;
    }
    auto& t0 = std::get<TournVars>(a0.group);
    auto& t1 = std::get<TournVars>(a1.group);
    const auto full = static_cast<std::uint32_t>(p.phi);
    if (t0.index != full || t1.index != full || t0.rand == t1.rand) {
        return;
    }
    State& lower = t0.rand < t1.rand ? a0 : a1;
    const std::uint32_t higher = std::max(t0.rand, t1.rand);
    lower.common.leader = false;
    std::get<TournVars>(lower.group).rand = higher;
}

inline void tournament(State& a0, State& a1, const Params& p)
{
    State* pair[2] = {&a0, &a1};
    for (int i = 0; i < 2; ++i) {
        State& self = *pair[i];
        if (is_leader(self) && is_follower(*pair[1 - i])) {
            auto& t = std::get<TournVars>(self.group);
            if (t.index < static_cast<std::uint32_t>(p.phi)) {
                append_nonce_bit(t, static_cast<std::uint32_t>(i), p);
            }
            break;
        }
    }
    spread_nonce(a0, a1, p);
}

// ---- BackUp (epoch 4) -------------------------------------------------------

inline void spread_backup_level(State& a0, State& a1)
{
    if (!is_candidate(a0) || !is_candidate(a1)) {
        return;
    }
    auto& b0 = std::get<BackupVars>(a0.group);
    auto& b1 = std::get<BackupVars>(a1.group);
    if (b0.level == b1.level) {
        return;
    }
    State& lower = b0.level < b1.level ? a0 : a1;
    std::get<BackupVars>(lower.group).level = std::max(b0.level, b1.level);
    lower.common.leader = false;
}

inline void back_up(State& a0, State& a1, const Params& p)
{
    if (a0.common.tick && is_leader(a0) && is_follower(a1)) {
        auto& b = std::get<BackupVars>(a0.group);
        b.level = bump(b.level, p.level_max);
    }
    spread_backup_level(a0, a1);
    if (is_leader(a0) && is_leader(a1)) {
        a1.common.leader = false;
    }
}

// ---- Full interaction -------------------------------------------------------

inline void interact(State& a0, State& a1, const Params& p)
{
    assign_status(a0, a1);
    a0.common.tick = a1.common.tick = false;
    count_up(a0, a1, p);
    advance_epochs(a0, a1, p);
    switch (a0.common.epoch) {
    case 1:
        quick_elimination(a0, a1, p);
        break;
    case 2:
    case 3:
        tournament(a0, a1, p);
        break;
    default:
        back_up(a0, a1, p);
        break;
    }
}

inline std::pair<State, State> transition(State a0, State a1, const Params& p)
{
    interact(a0, a1, p);
    return {std::move(a0), std::move(a1)};
}

// ---- State space -------------------------------------------------------------

/// Per-group sizes of the at-rest state space (tick cleared, init == epoch).
struct StateCount {
    std::uint64_t initial = 0;
    std::uint64_t timer = 0;
    std::uint64_t quick = 0;
    std::uint64_t tournament = 0;
    std::uint64_t backup = 0;

    std::uint64_t total() const noexcept { return initial + timer + quick + tournament + backup; }
};

inline std::vector<State> enumerate_states(const Params& p)
{
    std::vector<State> out;
    out.push_back(initial_state());
    auto common = [](bool leader, Status status, int epoch, int color) {
        CommonVars c;
        c.leader = leader;
        c.status = status;
        c.epoch = c.init = static_cast<std::uint8_t>(epoch);
        c.color = static_cast<std::uint8_t>(color);
        return c;
    };
    for (int e = 1; e <= 4; ++e) {
        for (int color = 0; color < 3; ++color) {
            for (int count = 0; count < p.count_max; ++count) {
                out.push_back({common(false, Status::B, e, color), Timer{static_cast<std::uint32_t>(count)}});
            }
        }
    }
    for (int e = 1; e <= 4; ++e) {
        for (bool leader : {false, true}) {
            for (int color = 0; color < 3; ++color) {
                const CommonVars c = common(leader, Status::A, e, color);
                if (e == 1) {
                    for (int level = 0; level <= p.level_max; ++level) {
                        for (bool done : {false, true}) {
                            out.push_back({c, QuickVars{static_cast<std::uint32_t>(level), done}});
                        }
                    }
                } else if (e == 4) {
                    for (int level = 0; level <= p.level_max; ++level) {
                        out.push_back({c, BackupVars{static_cast<std::uint32_t>(level)}});
                    }
                } else {
                    for (std::uint32_t r = 0; r < (1U << p.phi); ++r) {
                        for (int idx = 0; idx <= p.phi; ++idx) {
                            out.push_back({c, TournVars{r, static_cast<std::uint32_t>(idx)}});
                        }
                    }
                }
            }
        }
    }
    return out;
}

inline StateCount count_states(const Params& p)
{
    StateCount c;
    for (const State& s : enumerate_states(p)) {
        switch (s.group.index()) {
        case 0: ++c.initial; break;
        case 1: ++c.timer; break;
        case 2: ++c.quick; break;
        case 3: ++c.tournament; break;
        default: ++c.backup; break;
        }
    }
    return c;
}

// ---- Compact encoding (hashing, exhaustive search) ------------------------

// bits 0-1 status, 2 leader, 3 tick, 4-6 epoch, 7-9 init, 10-11 color,
// 12-14 group tag, 15-22 small field (done / index), 23-54 wide field.
inline std::uint64_t encode(const State& s)
{
    const auto& c = s.common;
    std::uint64_t code = static_cast<std::uint64_t>(c.status) | (std::uint64_t{c.leader} << 2) |
                         (std::uint64_t{c.tick} << 3) | (std::uint64_t{c.epoch} << 4) |
                         (std::uint64_t{c.init} << 7) | (std::uint64_t{c.color} << 10) |
                         (static_cast<std::uint64_t>(s.group.index()) << 12);
    std::uint64_t small = 0;
    std::uint64_t wide = 0;
    std::visit(
        [&](const auto& g) {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, Timer>) {
                wide = g.count;
            } else if constexpr (std::is_same_v<G, QuickVars>) {
                wide = g.level;
                small = g.done ? 1 : 0;
            } else if constexpr (std::is_same_v<G, TournVars>) {
                wide = g.rand;
                small = g.index;
            } else if constexpr (std::is_same_v<G, BackupVars>) {
                wide = g.level;
            }
        },
        s.group);
    return code | (small << 15) | (wide << 23);
}

inline State decode(std::uint64_t code)
{
    State s;
    auto& c = s.common;
    c.status = static_cast<Status>(code & 0x3);
    c.leader = ((code >> 2) & 1) != 0;
    c.tick = ((code >> 3) & 1) != 0;
    c.epoch = static_cast<std::uint8_t>((code >> 4) & 0x7);
    c.init = static_cast<std::uint8_t>((code >> 7) & 0x7);
    c.color = static_cast<std::uint8_t>((code >> 10) & 0x3);
    const auto tag = (code >> 12) & 0x7;
    const auto small = static_cast<std::uint32_t>((code >> 15) & 0xFF);
    const auto wide = static_cast<std::uint32_t>(code >> 23);
    switch (tag) {
    case 1: s.group = Timer{wide}; break;
    case 2: s.group = QuickVars{wide, small != 0}; break;
    case 3: s.group = TournVars{wide, small}; break;
    case 4: s.group = BackupVars{wide}; break;
    default: s.group = NoExtra{}; break;
    }
    return s;
}

/// P_LL as an engine protocol.
class LeaderElection {
public:
    using State = pll::State;

    explicit LeaderElection(Params params) : params_(params) {}
    explicit LeaderElection(int m) : params_(params_from_m(m)) {}

    const Params& params() const noexcept { return params_; }

    State initial_state() const { return pll::initial_state(); }
    void interact(State& a0, State& a1) const { pll::interact(a0, a1, params_); }
    Output output(const State& s) const noexcept { return pll::output(s); }
    std::vector<State> enumerate_states() const { return pll::enumerate_states(params_); }

    std::uint64_t encode(const State& s) const { return pll::encode(s); }
    State decode(std::uint64_t code) const { return pll::decode(code); }

    /// tick is reset before it is ever read, so it carries no information
    /// between interactions.
    State at_rest(State s) const
    {
        s.common.tick = false;
        return s;
    }

private:
    Params params_;
};

}  // namespace popleader::pll

template <>
struct std::hash<popleader::pll::State> {
    std::size_t operator()(const popleader::pll::State& s) const noexcept
    {
        return static_cast<std::size_t>(popleader::mix64(popleader::pll::encode(s)));
    }
};
