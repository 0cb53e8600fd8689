#pragma once

// Symmetric-transition variant of the logarithmic leader election.
//
// Role-based decisions of the asymmetric protocol are replaced as follows:
//   - status assignment: X x X -> Y x Y, Y x Y -> X x X, X x Y -> A x B;
//     an X or Y agent meeting an A or B agent becomes an A follower.
//   - coin flips: every follower holds a coin status J, K, F0 or F1.
//     Followers mix J x J -> K x K, K x K -> J x J, J x K -> F0 x F1, so the
//     F0 and F1 populations are always the same size. A leader that needs a
//     flip reads its partner's coin: F0 is heads, F1 is tails, J/K gives no
//     flip this interaction. Reading does not consume the coin.
//   - the BackUp two-leader rule demotes the smaller of two distinct leader
//     states under the encoding order, and does nothing for identical states.

#include "popleader/engine.hpp"
#include "popleader/pll.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace popleader::pll_sym {

using pll::Params;

enum class Status : std::uint8_t { X, Y, A, B };
enum class Coin : std::uint8_t { None, J, K, F0, F1 };

struct State {
    pll::State core;        // core.common.status == X for both X and Y
    bool y = false;         // distinguishes Y from X while unassigned
    Coin coin = Coin::None; // followers only

    friend bool operator==(const State&, const State&) = default;
};

inline State initial_state() { return State{}; }

inline Status status(const State& s) noexcept
{
    switch (s.core.common.status) {
    case pll::Status::A: return Status::A;
    case pll::Status::B: return Status::B;
    default: return s.y ? Status::Y : Status::X;
    }
}

inline bool is_unassigned(const State& s) noexcept { return s.core.common.status == pll::Status::X; }
inline bool is_leader(const State& s) noexcept { return s.core.common.leader; }
inline bool is_follower(const State& s) noexcept { return !s.core.common.leader; }
inline int epoch(const State& s) noexcept { return s.core.common.epoch; }
inline const pll::State& core(const State& s) noexcept { return s.core; }

inline Output output(const State& s) noexcept { return pll::output(s.core); }

inline bool is_consistent(const State& s, const Params& p)
{
    if (!pll::is_consistent(s.core, p)) {
        return false;
    }
    if (s.y && !is_unassigned(s)) {
        return false;
    }
    return is_leader(s) ? s.coin == Coin::None : s.coin != Coin::None;
}

enum class Flip : std::uint8_t { None, Heads, Tails };

constexpr Flip read_coin(Coin c) noexcept
{
    return c == Coin::F0 ? Flip::Heads : c == Coin::F1 ? Flip::Tails : Flip::None;
}

inline void sym_assign_status(State& a0, State& a1)
{
    const bool u0 = is_unassigned(a0);
    const bool u1 = is_unassigned(a1);
    if (u0 && u1) {
        if (a0.y == a1.y) {
            a0.y = a1.y = !a0.y;
            return;
        }
        State& x = a0.y ? a1 : a0;
        State& y = a0.y ? a0 : a1;
        pll::make_candidate(x.core, true, false);
        pll::make_timer(y.core);
        y.y = false;
        y.coin = Coin::J;
    } else if (u0 != u1) {
        State& a = u0 ? a0 : a1;
        pll::make_candidate(a.core, false, true);
        a.y = false;
        a.coin = Coin::J;
    }
}

inline void sym_coin_mix(State& a0, State& a1)
{
    if (!is_follower(a0) || !is_follower(a1)) {
        return;
    }
    Coin& c0 = a0.coin;
    Coin& c1 = a1.coin;
    if (c0 == Coin::J && c1 == Coin::J) {
        c0 = c1 = Coin::K;
    } else if (c0 == Coin::K && c1 == Coin::K) {
        c0 = c1 = Coin::J;
    } else if (c0 == Coin::J && c1 == Coin::K) {
        c0 = Coin::F0;
        c1 = Coin::F1;
    } else if (c0 == Coin::K && c1 == Coin::J) {
        c0 = Coin::F1;
        c1 = Coin::F0;
    }
}

inline void quick_elimination(State& a0, State& a1, const Params& p)
{
    State* pair[2] = {&a0, &a1};
    for (int i = 0; i < 2; ++i) {
        State& self = *pair[i];
        if (is_leader(self) && is_follower(*pair[1 - i])) {
            auto& q = std::get<pll::QuickVars>(self.core.group);
            if (!q.done) {
                switch (read_coin(pair[1 - i]->coin)) {
                case Flip::Heads: q.level = pll::bump(q.level, p.level_max); break;
                case Flip::Tails: q.done = true; break;
                case Flip::None: break;
                }
            }
            break;
        }
    }
    pll::spread_quick_level(a0.core, a1.core);
}

inline void tournament(State& a0, State& a1, const Params& p)
{
    State* pair[2] = {&a0, &a1};
    for (int i = 0; i < 2; ++i) {
        State& self = *pair[i];
        if (is_leader(self) && is_follower(*pair[1 - i])) {
            auto& t = std::get<pll::TournVars>(self.core.group);
            const Flip f = read_coin(pair[1 - i]->coin);
            if (t.index < static_cast<std::uint32_t>(p.phi) && f != Flip::None) {
                pll::append_nonce_bit(t, f == Flip::Heads ? 0 : 1, p);
            }
            break;
        }
    }
    pll::spread_nonce(a0.core, a1.core, p);
}

// pll encoding occupies bits 0-54; y at 56, coin at 57-59.
inline std::uint64_t encode(const State& s)
{
    return pll::encode(s.core) | (std::uint64_t{s.y} << 56) | (static_cast<std::uint64_t>(s.coin) << 57);
}

inline State decode(std::uint64_t code)
{
    State s;
    s.core = pll::decode(code & ((std::uint64_t{1} << 56) - 1));
    s.y = ((code >> 56) & 1) != 0;
    s.coin = static_cast<Coin>((code >> 57) & 0x7);
    return s;
}

inline void back_up(State& a0, State& a1, const Params& p)
{
    State* pair[2] = {&a0, &a1};
    for (int i = 0; i < 2; ++i) {
        State& self = *pair[i];
        if (self.core.common.tick && is_leader(self) && is_follower(*pair[1 - i]) &&
            read_coin(pair[1 - i]->coin) == Flip::Heads) {
            auto& b = std::get<pll::BackupVars>(self.core.group);
            b.level = pll::bump(b.level, p.level_max);
        }
    }
    pll::spread_backup_level(a0.core, a1.core);
    if (is_leader(a0) && is_leader(a1) && !(a0 == a1)) {
        State& smaller = encode(a0) < encode(a1) ? a0 : a1;
        smaller.core.common.leader = false;
    }
}

inline void sym_transition(State& a0, State& a1, const Params& p)
{
    sym_assign_status(a0, a1);
    if (is_unassigned(a0) || is_unassigned(a1)) {
        return;
    }
    sym_coin_mix(a0, a1);
    const bool was_leader0 = is_leader(a0);
    const bool was_leader1 = is_leader(a1);
    a0.core.common.tick = a1.core.common.tick = false;
    pll::count_up(a0.core, a1.core, p);
    pll::advance_epochs(a0.core, a1.core, p);
    switch (a0.core.common.epoch) {
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
    if (was_leader0 && is_follower(a0)) {
        a0.coin = Coin::J;
    }
    if (was_leader1 && is_follower(a1)) {
        a1.coin = Coin::J;
    }
}

/// Every at-rest state honouring the coin rule: X, Y, and each P_LL state
/// with followers expanded over the four coin statuses.
inline std::vector<State> enumerate_states(const Params& p)
{
    std::vector<State> out;
    out.push_back(initial_state());
    State y = initial_state();
    y.y = true;
    out.push_back(y);
    for (const pll::State& c : pll::enumerate_states(p)) {
        if (c.common.status == pll::Status::X) {
            continue;
        }
        if (c.common.leader) {
            out.push_back(State{c, false, Coin::None});
        } else {
            for (Coin coin : {Coin::J, Coin::K, Coin::F0, Coin::F1}) {
                out.push_back(State{c, false, coin});
            }
        }
    }
    return out;
}

class SymmetricLeaderElection {
public:
    using State = pll_sym::State;

    explicit SymmetricLeaderElection(Params params) : params_(params) {}
    explicit SymmetricLeaderElection(int m) : params_(pll::params_from_m(m)) {}

    const Params& params() const noexcept { return params_; }

    /// With two agents the X/Y exchange never ends.
    std::size_t min_population() const noexcept { return 3; }

    State initial_state() const { return pll_sym::initial_state(); }
    void interact(State& a0, State& a1) const { sym_transition(a0, a1, params_); }
    Output output(const State& s) const noexcept { return pll_sym::output(s); }
    std::vector<State> enumerate_states() const { return pll_sym::enumerate_states(params_); }

    std::uint64_t encode(const State& s) const { return pll_sym::encode(s); }
    State decode(std::uint64_t code) const { return pll_sym::decode(code); }

    State at_rest(State s) const
    {
        s.core.common.tick = false;
        return s;
    }

private:
    Params params_;
};

}  // namespace popleader::pll_sym

template <>
struct std::hash<popleader::pll_sym::State> {
    std::size_t operator()(const popleader::pll_sym::State& s) const noexcept
    {
        return static_cast<std::size_t>(popleader::mix64(popleader::pll_sym::encode(s)));
    }
};
