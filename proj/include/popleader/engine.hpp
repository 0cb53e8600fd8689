#pragma once

// Population-protocol execution core: protocol concept, uniformly random
// scheduler, configuration stepping, run loop and the one-way epidemic.

#include <algorithm>
#include <bit>
#include <compare>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace popleader {

class InvalidPopulation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct AgentId {
    std::uint32_t index = 0;

    friend constexpr auto operator<=>(AgentId, AgentId) = default;
};

struct InteractionEvent {
    AgentId initiator;
    AgentId responder;
    std::uint64_t step = 0;

    friend constexpr bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

enum class Output : std::uint8_t { Leader, Follower };

constexpr char to_char(Output o) noexcept { return o == Output::Leader ? 'L' : 'F'; }

/// SplitMix64 finalizer. Used to derive independent per-trial seeds from a
/// master seed so that trial i always sees the same stream.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept
{
    return mix64(mix64(master) ^ (index * 0xD1B54A32D192ED03ULL + 1));
}

/// Seeded 64-bit generator. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; bounded draws use Lemire's
/// multiply-and-reject method so no library distribution (whose algorithm
/// is implementation-defined) sits between the seed and the schedule.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound)
    {
        if (bound == 0) {
            throw InvalidParameter("RandomSource::below: bound must be positive");
        }
        unsigned __int128 product = static_cast<unsigned __int128>(next()) * bound;
        auto low = static_cast<std::uint64_t>(product);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                product = static_cast<unsigned __int128>(next()) * bound;
                low = static_cast<std::uint64_t>(product);
            }
        }
        return static_cast<std::uint64_t>(product >> 64);
    }

    bool coin() { return (next() >> 63) != 0; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// Draws an ordered pair uniformly from the n(n-1) pairs of distinct agents.
inline InteractionEvent draw_interaction(RandomSource& rng, std::size_t n, std::uint64_t step = 0)
{
    if (n < 2) {
        throw InvalidPopulation("an interaction needs at least two agents, got n=" + std::to_string(n));
    }
    const std::uint64_t others = n - 1;
    const std::uint64_t k = rng.below(static_cast<std::uint64_t>(n) * others);
    const auto initiator = static_cast<std::uint32_t>(k / others);
    auto responder = static_cast<std::uint32_t>(k % others);
    if (responder >= initiator) {
        ++responder;
    }
    return {AgentId{initiator}, AgentId{responder}, step};
}

constexpr double parallel_time(std::uint64_t steps, std::size_t n)
{
    if (n == 0) {
        throw InvalidPopulation("parallel time needs n >= 1");
    }
    return static_cast<double>(steps) / static_cast<double>(n);
}

/// ceil(log2 n) for n >= 1.
constexpr int ceil_log2(std::uint64_t n) noexcept
{
    return n <= 1 ? 0 : static_cast<int>(std::bit_width(n - 1));
}

/// 500 * n * max(1, ceil(log2 n)).
constexpr std::uint64_t default_max_steps(std::size_t n) noexcept
{
    return 500ULL * n * static_cast<std::uint64_t>(std::max(1, ceil_log2(n)));
}

// A protocol bundles the state type, s_init, the transition function and the
// output map. `interact` mutates the (initiator, responder) pair in place.
template <class P>
concept PopulationProtocol = requires(const P& p, typename P::State& a, typename P::State& b) {
    typename P::State;
    { p.initial_state() } -> std::convertible_to<typename P::State>;
    { p.interact(a, b) };
    { p.output(std::as_const(a)) } -> std::same_as<Output>;
};

template <class P>
concept EnumerableProtocol = PopulationProtocol<P> && requires(const P& p) {
    { p.enumerate_states() } -> std::same_as<std::vector<typename P::State>>;
};

template <PopulationProtocol P>
using StateOf = typename P::State;

template <PopulationProtocol P>
constexpr std::size_t min_population(const P& p)
{
    if constexpr (requires { { p.min_population() } -> std::convertible_to<std::size_t>; }) {
        return p.min_population();
    } else {
        return 2;
    }
}

/// Value-returning form of `interact`.
template <PopulationProtocol P>
std::pair<StateOf<P>, StateOf<P>> transition(const P& p, StateOf<P> initiator, StateOf<P> responder)
{
    p.interact(initiator, responder);
    return {std::move(initiator), std::move(responder)};
}

template <class State>
struct Configuration {
    std::vector<State> states;
    std::uint64_t step = 0;
    std::size_t leaders = 0;

    std::size_t size() const noexcept { return states.size(); }
    const State& operator[](AgentId id) const { return states.at(id.index); }
};

template <PopulationProtocol P>
std::size_t count_leaders(const P& p, std::span<const StateOf<P>> states)
{
    return static_cast<std::size_t>(std::count_if(states.begin(), states.end(), [&](const auto& s) {
        return p.output(s) == Output::Leader;
    }));
}

template <PopulationProtocol P>
Configuration<StateOf<P>> make_configuration(const P& p, std::vector<StateOf<P>> states, std::uint64_t step = 0)
{
    Configuration<StateOf<P>> c{std::move(states), step, 0};
    c.leaders = count_leaders(p, std::span<const StateOf<P>>(c.states));
    return c;
}

template <PopulationProtocol P>
Configuration<StateOf<P>> initial_configuration(const P& p, std::size_t n)
{
    const std::size_t lo = min_population(p);
    if (n < lo) {
        throw InvalidPopulation("population size " + std::to_string(n) + " is below this protocol's minimum of " +
                                std::to_string(lo));
    }
    return make_configuration(p, std::vector<StateOf<P>>(n, p.initial_state()));
}

/// Applies one interaction in place. Only the two participants change; the
/// step counter advances by one and the cached leader count is kept exact.
template <PopulationProtocol P>
void step(const P& p, Configuration<StateOf<P>>& config, const InteractionEvent& event)
{
    const std::size_t n = config.size();
    if (event.initiator.index >= n || event.responder.index >= n) {
        throw std::out_of_range("interaction references an agent outside the population");
    }
    if (event.initiator == event.responder) {
        throw std::invalid_argument("an agent cannot interact with itself");
    }
    auto& a0 = config.states[event.initiator.index];
    auto& a1 = config.states[event.responder.index];
    const int before = (p.output(a0) == Output::Leader) + (p.output(a1) == Output::Leader);
    p.interact(a0, a1);
    const int after = (p.output(a0) == Output::Leader) + (p.output(a1) == Output::Leader);
    config.leaders = config.leaders + static_cast<std::size_t>(after) - static_cast<std::size_t>(before);
    ++config.step;
}

struct NoObserver {
    template <class State>
    void operator()(const InteractionEvent&, const State&, const State&) const noexcept {}
};

/// Records every drawn event; two runs with the same seed must agree.
struct TraceRecorder {
    std::vector<InteractionEvent> events;

    template <class State>
    void operator()(const InteractionEvent& e, const State&, const State&)
    {
        events.push_back(e);
    }
};

struct RunResult {
    bool stopped = false;       // the stop condition fired
    std::uint64_t steps = 0;    // configuration step counter at exit
};

template <class State>
struct Execution {
    RunResult result;
    Configuration<State> final;
};

/// Draw-and-step loop. The stop condition is evaluated on the starting
/// configuration and after every step. Running out of `max_steps` returns
/// `stopped == false`; it is not an error.
template <PopulationProtocol P, class Stop, class Observer = NoObserver>
    requires std::predicate<Stop&, const Configuration<StateOf<P>>&>
RunResult run(const P& p, Configuration<StateOf<P>>& config, RandomSource& rng, Stop&& stop,
              std::uint64_t max_steps, Observer&& observer = {})
{
    if (max_steps < 1) {
        throw InvalidParameter("max_steps must be at least 1");
    }
    const std::size_t n = config.size();
    if (n < 2) {
        throw InvalidPopulation("cannot run a population of fewer than two agents");
    }
    if (stop(std::as_const(config))) {
        return {true, config.step};
    }
    for (std::uint64_t i = 0; i < max_steps; ++i) {
        const InteractionEvent e = draw_interaction(rng, n, config.step);
        step(p, config, e);
        observer(e, std::as_const(config.states[e.initiator.index]), std::as_const(config.states[e.responder.index]));
        if (stop(std::as_const(config))) {
            return {true, config.step};
        }
    }
    return {false, config.step};
}

template <PopulationProtocol P, class Stop, class Observer = NoObserver>
Execution<StateOf<P>> execute(const P& p, std::size_t n, RandomSource& rng, Stop&& stop, std::uint64_t max_steps,
                              Observer&& observer = {})
{
    Execution<StateOf<P>> ex{{}, initial_configuration(p, n)};
    ex.result = run(p, ex.final, rng, std::forward<Stop>(stop), max_steps, std::forward<Observer>(observer));
    return ex;
}

/// Stop condition: exactly one agent outputs L.
struct SingleLeader {
    template <class State>
    bool operator()(const Configuration<State>& c) const noexcept
    {
        return c.leaders == 1;
    }
};

struct Never {
    template <class State>
    bool operator()(const Configuration<State>&) const noexcept
    {
        return false;
    }
};

struct EpidemicResult {
    bool completed = false;
    std::uint64_t steps = 0;  // completion step, or steps taken before giving up
};

/// One-way epidemic over the sub-population {0, ..., subset-1} seeded at
/// agent 0, driven by the scheduler over the whole population of n agents.
/// `on_step(step, infected)` sees the infected-set size after every step.
template <class OnStep>
EpidemicResult simulate_epidemic(std::size_t n, std::size_t subset, RandomSource& rng, std::uint64_t max_steps,
                                 OnStep&& on_step)
{
    if (subset < 1 || subset > n) {
        throw InvalidParameter("epidemic subset size must lie in [1, n]");
    }
    std::size_t infected_count = 1;
    if (infected_count == subset) {
        return {true, 0};
    }
    if (n < 2) {
        throw InvalidPopulation("an epidemic over more than one agent needs n >= 2");
    }
    std::vector<char> infected(n, 0);
    infected[0] = 1;
    for (std::uint64_t t = 0; t < max_steps; ++t) {
        const InteractionEvent e = draw_interaction(rng, n, t);
        const auto u = e.initiator.index;
        const auto v = e.responder.index;
        if (infected[u] != infected[v]) {
            const auto fresh = infected[u] ? v : u;
            if (fresh < subset) {
                infected[fresh] = 1;
                ++infected_count;
            }
        }
        on_step(t + 1, infected_count);
        if (infected_count == subset) {
            return {true, t + 1};
        }
    }
    return {false, max_steps};
}

inline EpidemicResult simulate_epidemic(std::size_t n, std::size_t subset, RandomSource& rng,
                                        std::uint64_t max_steps)
{
    return simulate_epidemic(n, subset, rng, max_steps, [](std::uint64_t, std::size_t) {});
}

}  // namespace popleader
