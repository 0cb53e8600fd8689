#pragma once

#include "popleader/engine.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace popleader::baseline {

struct State {
    bool leader = true;

    friend constexpr bool operator==(State, State) = default;
};

/// Two-state election: when two leaders meet, the responder becomes a
/// follower. Constant space, Theta(n) expected parallel time.
class PairwiseElimination {
public:
    using State = baseline::State;

    State initial_state() const noexcept { return {}; }

    void interact(State& a0, State& a1) const noexcept
    {
        if (a0.leader && a1.leader) {
            a1.leader = false;
        }
    }

    Output output(const State& s) const noexcept { return s.leader ? Output::Leader : Output::Follower; }

    std::vector<State> enumerate_states() const { return {State{true}, State{false}}; }

    std::uint64_t encode(const State& s) const noexcept { return s.leader ? 1 : 0; }
    State decode(std::uint64_t code) const noexcept { return State{code != 0}; }
};

}  // namespace popleader::baseline

template <>
struct std::hash<popleader::baseline::State> {
    std::size_t operator()(popleader::baseline::State s) const noexcept { return s.leader ? 1 : 0; }
};
