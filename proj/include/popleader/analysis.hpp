#pragma once

// Measurement and verification on top of the engine: stabilization reports,
// survivor histograms at the ⌊21 n ln n⌋ horizon, epidemic bound checks,
// configuration predicates, exhaustive closure search and per-step
// invariant monitoring.

#include "popleader/engine.hpp"
#include "popleader/pll.hpp"
#include "popleader/pll_sym.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <memory>
#include <string>
#include <thread>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

namespace popleader::analysis {

inline unsigned default_jobs() { return std::max(1U, std::thread::hardware_concurrency()); }

/// Runs fn(0) ... fn(trials-1) on up to `jobs` threads. Results are stored
/// by trial index, so the output does not depend on completion order.
template <class Fn>
auto run_trials(std::size_t trials, unsigned jobs, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>>
{
    using Result = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<Result> results(trials);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= trials) {
                return;
            }
            try {
                results[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(trials);
                return;
            }
        }
    };
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1U, jobs), trials));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return results;
}

// ---- Stabilization --------------------------------------------------------

struct TrajectoryPoint {
    std::uint64_t step = 0;
    std::size_t leaders = 0;

    friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct StabilizationReport {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    std::uint64_t convergence_step = 0;  // steps run when not converged
    double parallel_time = 0.0;
    std::vector<TrajectoryPoint> leader_trajectory;
    std::array<std::optional<std::uint64_t>, 4> epoch_entry{};  // first step any agent reached epoch e+1
    // Set only with follow_through: the leader count stayed at one after
    // convergence until max_steps.
    bool stayed_single = true;

    friend bool operator==(const StabilizationReport&, const StabilizationReport&) = default;
};

struct StabilizationOptions {
    std::uint64_t max_steps = 0;        // 0: default_max_steps(n)
    std::uint64_t sample_interval = 0;  // 0: ceil(n / 4)
    bool follow_through = false;        // keep running after convergence up to max_steps
};

template <class State>
concept HasEpoch = requires(const State& s) {
    { epoch(s) } -> std::convertible_to<int>;
};

/// Runs from the initial configuration until the first step with exactly
/// one leader. Leader counts never increase, so that step is the
/// convergence point.
template <PopulationProtocol P>
StabilizationReport measure_stabilization(const P& protocol, std::size_t n, std::uint64_t seed,
                                          StabilizationOptions options = {})
{
    using State = StateOf<P>;
    const std::uint64_t max_steps = options.max_steps != 0 ? options.max_steps : default_max_steps(n);
    const std::uint64_t interval = options.sample_interval != 0 ? options.sample_interval : (n + 3) / 4;

    StabilizationReport report;
    report.n = n;
    report.seed = seed;

    RandomSource rng(seed);
    auto config = initial_configuration(protocol, n);
    report.leader_trajectory.push_back({0, config.leaders});
    int highest_epoch = 1;
    if constexpr (HasEpoch<State>) {
        report.epoch_entry[0] = 0;
    }

    auto observe = [&](const InteractionEvent& e, const State& s0, const State&) {
        const std::uint64_t now = e.step + 1;
        if (now % interval == 0) {
            report.leader_trajectory.push_back({now, config.leaders});
        }
        if constexpr (HasEpoch<State>) {
            // Both participants share an epoch after every interaction.
            const int reached = epoch(s0);
            while (highest_epoch < reached) {
                report.epoch_entry[static_cast<std::size_t>(highest_epoch)] = now;
                ++highest_epoch;
            }
        }
    };

    const RunResult first = run(protocol, config, rng, SingleLeader{}, max_steps, observe);
    report.converged = first.stopped;
    report.convergence_step = first.steps;
    report.parallel_time = parallel_time(first.steps, n);
    if (report.leader_trajectory.back().step != first.steps) {
        report.leader_trajectory.push_back({first.steps, config.leaders});
    }

    if (options.follow_through && first.stopped && first.steps < max_steps) {
        auto left_single = [](const Configuration<State>& c) { return c.leaders != 1; };
        const RunResult tail = run(protocol, config, rng, left_single, max_steps - first.steps, observe);
        report.stayed_single = !tail.stopped;
    }
    return report;
}

template <PopulationProtocol P>
std::vector<StabilizationReport> measure_many(const P& protocol, std::size_t n, std::size_t trials,
                                              std::uint64_t master_seed, StabilizationOptions options = {},
                                              unsigned jobs = default_jobs())
{
    return run_trials(trials, jobs, [&](std::size_t i) {
        return measure_stabilization(protocol, n, derive_seed(master_seed, i), options);
    });
}

struct StabilizationSummary {
    std::size_t trials = 0;
    std::size_t converged = 0;
    double mean_parallel_time = 0.0;
    double median_parallel_time = 0.0;
    double p95_parallel_time = 0.0;
};

inline double quantile(std::vector<double> values, double q)
{
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    // Nearest-rank.
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

/// Statistics over converged trials only.
inline StabilizationSummary summarize(std::span<const StabilizationReport> reports)
{
    StabilizationSummary s;
    s.trials = reports.size();
    std::vector<double> times;
    for (const auto& r : reports) {
        if (r.converged) {
            times.push_back(r.parallel_time);
        }
    }
    s.converged = times.size();
    if (!times.empty()) {
        double sum = 0.0;
        for (double t : times) {
            sum += t;
        }
        s.mean_parallel_time = sum / static_cast<double>(times.size());
        s.median_parallel_time = quantile(times, 0.5);
        s.p95_parallel_time = quantile(times, 0.95);
    }
    return s;
}

// ---- Survivors at the ⌊21 n ln n⌋ horizon --------------------------------

inline std::uint64_t survivor_horizon(std::size_t n)
{
    return static_cast<std::uint64_t>(std::floor(21.0 * static_cast<double>(n) * std::log(static_cast<double>(n))));
}

/// 2^(1-i): the bound on Pr(exactly i leaders survive QuickElimination).
inline double survivor_bound(std::size_t i) { return std::ldexp(1.0, 1 - static_cast<int>(i)); }

/// Allowance added to an analytic probability bound when it is compared to
/// an empirical frequency over `trials` samples.
inline double statistical_slack(double p, std::size_t trials)
{
    const double sigma = std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(std::max<std::size_t>(1, trials)));
    return std::max(0.05, 3.0 * sigma);
}

struct SurvivorHistogram {
    std::size_t n = 0;
    int m = 0;
    std::size_t trials = 0;
    std::uint64_t horizon_step = 0;
    std::vector<std::size_t> counts;  // counts[i]: trials ending with exactly i leaders

    double fraction(std::size_t i) const
    {
        return i < counts.size() ? static_cast<double>(counts[i]) / static_cast<double>(trials) : 0.0;
    }
    double tail_fraction(std::size_t from) const
    {
        double f = 0.0;
        for (std::size_t i = from; i < counts.size(); ++i) {
            f += fraction(i);
        }
        return f;
    }
};

inline SurvivorHistogram survivor_histogram(std::size_t n, int m, std::size_t trials, std::uint64_t seed,
                                            unsigned jobs = default_jobs())
{
    if (trials < 1) {
        throw InvalidParameter("survivor_histogram needs at least one trial");
    }
    const pll::LeaderElection protocol(m);
    SurvivorHistogram h{n, m, trials, survivor_horizon(n), std::vector<std::size_t>(n + 1, 0)};
    const auto leaders = run_trials(trials, jobs, [&](std::size_t i) {
        RandomSource rng(derive_seed(seed, i));
        auto config = initial_configuration(protocol, n);
        run(protocol, config, rng, Never{}, h.horizon_step);
        return config.leaders;
    });
    for (std::size_t l : leaders) {
        ++h.counts[l];
    }
    return h;
}

// ---- Epidemic bound -----------------------------------------------------------

struct EpidemicBoundReport {
    std::size_t n = 0;
    std::size_t subset = 0;
    std::uint64_t t = 0;
    std::uint64_t horizon = 0;  // 2 ceil(n / n') t
    std::size_t trials = 0;
    std::size_t failures = 0;
    double empirical_rate = 0.0;
    double analytic_bound = 0.0;  // n e^{-t/n}
};

/// ⌊3 n ln n⌋, the t that makes the bound n^-2.
inline std::uint64_t default_epidemic_t(std::size_t n)
{
    return static_cast<std::uint64_t>(std::floor(3.0 * static_cast<double>(n) * std::log(static_cast<double>(n))));
}

inline EpidemicBoundReport epidemic_bound_check(std::size_t n, std::size_t subset, std::size_t trials,
                                                std::uint64_t t, std::uint64_t seed,
                                                unsigned jobs = default_jobs())
{
    if (subset < 1 || subset > n) {
        throw InvalidParameter("epidemic subset size must lie in [1, n]");
    }
    EpidemicBoundReport r;
    r.n = n;
    r.subset = subset;
    r.t = t;
    r.trials = trials;
    r.horizon = 2 * ((n + subset - 1) / subset) * t;
    r.analytic_bound = static_cast<double>(n) * std::exp(-static_cast<double>(t) / static_cast<double>(n));
    const auto done = run_trials(trials, jobs, [&](std::size_t i) {
        RandomSource rng(derive_seed(seed, i));
        return static_cast<char>(simulate_epidemic(n, subset, rng, std::max<std::uint64_t>(1, r.horizon)).completed);
    });
    r.failures = static_cast<std::size_t>(std::count(done.begin(), done.end(), 0));
    r.empirical_rate = trials == 0 ? 0.0 : static_cast<double>(r.failures) / static_cast<double>(trials);
    return r;
}

// ---- Configuration predicates ---------------------------------------------

struct ConfigPredicates {
    std::array<bool, 3> color_uniform{};  // every agent has color i
    std::array<bool, 3> start{};          // some agent has color i, those timers sit at count 0, nobody has i+1
    bool b_start = false;                 // color_uniform(0), all in epoch 4, every level_b <= 1
};

template <class State>
ConfigPredicates config_predicates(std::span<const State> states)
{
    std::array<std::size_t, 3> with_color{};
    std::array<bool, 3> timer_running{};
    bool all_epoch4 = true;
    bool low_backup = true;
    for (const State& full : states) {
        const pll::State& s = core(full);
        const auto c = s.common.color;
        ++with_color[c];
        if (const auto* t = std::get_if<pll::Timer>(&s.group); t != nullptr && pll::is_timer(s) && t->count != 0) {
            timer_running[c] = true;
        }
        all_epoch4 = all_epoch4 && s.common.epoch == 4;
        if (pll::is_candidate(s)) {
            const auto* b = std::get_if<pll::BackupVars>(&s.group);
            low_backup = low_backup && b != nullptr && b->level <= 1;
        }
    }
    ConfigPredicates out;
    for (std::size_t i = 0; i < 3; ++i) {
        out.color_uniform[i] = with_color[i] == states.size();
        out.start[i] = with_color[i] > 0 && !timer_running[i] && with_color[(i + 1) % 3] == 0;
    }
    out.b_start = out.color_uniform[0] && all_epoch4 && low_backup;
    return out;
}

// ---- Exhaustive closure -------------------------------------------------------

template <class P>
concept EncodableProtocol = PopulationProtocol<P> && requires(const P& p, const StateOf<P>& s, std::uint64_t code) {
    { p.encode(s) } -> std::same_as<std::uint64_t>;
    { p.decode(code) } -> std::same_as<StateOf<P>>;
};

enum class ClosureVerdict : std::uint8_t { Safe, Unsafe, Inconclusive };

inline const char* to_string(ClosureVerdict v)
{
    switch (v) {
    case ClosureVerdict::Safe: return "safe";
    case ClosureVerdict::Unsafe: return "unsafe";
    default: return "inconclusive";
    }
}

struct ClosureResult {
    std::uint64_t explored = 0;
    ClosureVerdict verdict = ClosureVerdict::Inconclusive;
    std::size_t start_index = 0;                   // which start the counterexample begins from
    std::vector<InteractionEvent> counterexample;  // schedule from that start configuration

    bool safe() const noexcept { return verdict == ClosureVerdict::Safe; }
};

namespace detail {

using StateId = std::uint16_t;

/// Append-only array of fixed-width rows kept in fixed-size chunks, so the
/// store grows without copying what is already there.
class ChunkedRows {
public:
    explicit ChunkedRows(std::size_t width) : width_(width) {}

    std::size_t size() const noexcept { return size_; }
    StateId* row(std::size_t i) noexcept { return chunks_[i >> kShift].get() + (i & kMask) * width_; }
    const StateId* row(std::size_t i) const noexcept
    {
        return chunks_[i >> kShift].get() + (i & kMask) * width_;
    }

    /// Reserves the next row and returns it; commit() keeps it.
    StateId* scratch()
    {
        if ((size_ >> kShift) == chunks_.size()) {
            chunks_.push_back(std::make_unique<StateId[]>((kMask + 1) * width_));
        }
        return row(size_);
    }
    void commit() noexcept { ++size_; }

private:
    static constexpr std::size_t kShift = 20;
    static constexpr std::size_t kMask = (std::size_t{1} << kShift) - 1;
    std::size_t width_;
    std::size_t size_ = 0;
    std::vector<std::unique_ptr<StateId[]>> chunks_;
};

/// Open-addressing set of row indices. Each slot keeps the index in its low
/// half and a hash tag in its high half.
class ConfigTable {
public:
    explicit ConfigTable(const ChunkedRows& rows, std::size_t width)
        : rows_(rows), width_(width), slots_(std::size_t{1} << 16, 0)
    {
    }

    std::uint64_t hash(const StateId* key) const noexcept
    {
        std::uint64_t h = 0x243F6A8885A308D3ULL;
        for (std::size_t i = 0; i < width_; i += 4) {
            std::uint64_t word = 0;
            for (std::size_t k = i; k < std::min(width_, i + 4); ++k) {
                word = (word << 16) | key[k];
            }
            h = mix64(h ^ word);
        }
        return h;
    }

    /// Adds row `idx`. Returns false if an equal row is already present.
    bool insert(std::uint32_t idx)
    {
        if (2 * (size_ + 1) > slots_.size()) {
            grow();
        }
        if (!place(idx, true)) {
            return false;
        }
        ++size_;
        return true;
    }

private:
    bool place(std::uint32_t idx, bool check)
    {
        const StateId* key = rows_.row(idx);
        const std::uint64_t h = hash(key);
        const std::uint64_t tag = h >> 32;
        const std::size_t mask = slots_.size() - 1;
        for (std::size_t at = static_cast<std::size_t>(h) & mask;; at = (at + 1) & mask) {
            const std::uint64_t slot = slots_[at];
            if (slot == 0) {
                slots_[at] = (tag << 32) | (std::uint64_t{idx} + 1);
                return true;
            }
            if (check && (slot >> 32) == tag) {
                const StateId* other = rows_.row((slot & 0xFFFFFFFFULL) - 1);
                if (std::equal(key, key + width_, other)) {
                    return false;
                }
            }
        }
    }

    void grow()
    {
        std::vector<std::uint64_t> old(slots_.size() * 2, 0);
        old.swap(slots_);
        for (std::uint64_t slot : old) {
            if (slot != 0) {
                place(static_cast<std::uint32_t>((slot & 0xFFFFFFFFULL) - 1), false);
            }
        }
    }

    const ChunkedRows& rows_;
    std::size_t width_;
    std::size_t size_ = 0;
    std::vector<std::uint64_t> slots_;
};

}  // namespace detail

/// Breadth-first search over every configuration reachable from any of
/// `starts` under any schedule. Safe iff no interaction anywhere changes an
/// agent's output. Agents are anonymous, so a configuration is stored as the
/// sorted multiset of its states (each distinct state gets a small id and
/// each pair of ids is evaluated once), and all starts share one visited
/// set. A counterexample is replayed on its concrete start configuration so
/// that it is reported in the caller's agent ids.
template <EncodableProtocol P>
ClosureResult verify_closure(const P& protocol, std::span<const std::vector<StateOf<P>>> starts,
                             std::size_t max_configs = 4'000'000)
{
    using State = StateOf<P>;
    using detail::StateId;
    constexpr std::size_t kMaxAgents = 8;
    constexpr std::size_t kMaxStates = 0xFFFF;
    if (starts.empty()) {
        throw InvalidParameter("closure search needs at least one start configuration");
    }
    const std::size_t n = starts.front().size();
    if (n < 2 || n > kMaxAgents) {
        throw InvalidPopulation("closure search supports 2 to 8 agents");
    }
    auto rest = [&](State s) {
        if constexpr (requires { protocol.at_rest(s); }) {
            return protocol.at_rest(std::move(s));
        } else {
            return s;
        }
    };

    ClosureResult result;
    std::unordered_map<std::uint64_t, StateId> ids;
    std::vector<State> by_id;
    bool too_many_states = false;
    auto id_of = [&](const State& s) -> StateId {
        const State r = rest(s);
        const auto [it, fresh] = ids.try_emplace(protocol.encode(r), static_cast<StateId>(by_id.size()));
        if (fresh) {
            if (by_id.size() >= kMaxStates) {
                too_many_states = true;
            }
            by_id.push_back(r);
        }
        return it->second;
    };

    // (a, b) -> (a', b') plus whether an output changed; packed into 64 bits.
    constexpr std::uint64_t kUnsafe = std::uint64_t{1} << 40;
    std::unordered_map<std::uint32_t, std::uint64_t> moves;
    auto move = [&](StateId a, StateId b) -> std::uint64_t {
        const std::uint32_t key = (std::uint32_t{a} << 16) | b;
        if (auto it = moves.find(key); it != moves.end()) {
            return it->second;
        }
        State s0 = by_id[a];
        State s1 = by_id[b];
        protocol.interact(s0, s1);
        const bool changed = protocol.output(s0) != protocol.output(by_id[a]) ||
                             protocol.output(s1) != protocol.output(by_id[b]);
        const StateId c = id_of(s0);
        const StateId d = id_of(s1);
        const std::uint64_t packed = (changed ? kUnsafe : 0) | (std::uint64_t{c} << 16) | d;
        moves.emplace(key, packed);
        return packed;
    };

    detail::ChunkedRows rows(n);
    detail::ConfigTable table(rows, n);
    std::vector<std::uint32_t> parent;             // roots point at themselves
    std::vector<std::array<std::uint8_t, 2>> via;  // sorted positions in the parent
    std::vector<std::pair<std::uint32_t, std::size_t>> roots;  // (row, start index)

    for (std::size_t k = 0; k < starts.size(); ++k) {
        if (starts[k].size() != n) {
            throw InvalidPopulation("closure starts must share one population size");
        }
        StateId* row = rows.scratch();
        for (std::size_t i = 0; i < n; ++i) {
            row[i] = id_of(starts[k][i]);
        }
        std::sort(row, row + n);
        const auto idx = static_cast<std::uint32_t>(rows.size());
        if (table.insert(idx)) {
            rows.commit();
            parent.push_back(idx);
            via.push_back({0, 0});
            roots.emplace_back(idx, k);
        }
    }

    // Turns a chain of sorted-position events into agent ids by replaying it.
    auto replay = [&](std::size_t leaf, std::array<std::uint8_t, 2> last) {
        std::vector<std::array<std::uint8_t, 2>> chain{last};
        std::size_t at = leaf;
        for (; parent[at] != at; at = parent[at]) {
            chain.push_back(via[at]);
        }
        std::reverse(chain.begin(), chain.end());
        result.start_index =
            std::find_if(roots.begin(), roots.end(), [&](const auto& r) { return r.first == at; })->second;
        std::vector<State> agents;
        for (const State& s : starts[result.start_index]) {
            agents.push_back(rest(s));
        }
        std::vector<std::uint32_t> order(n);
        for (const auto& [i, j] : chain) {
            for (std::uint32_t k = 0; k < n; ++k) {
                order[k] = k;
            }
            std::stable_sort(order.begin(), order.end(),
                             [&](std::uint32_t a, std::uint32_t b) { return id_of(agents[a]) < id_of(agents[b]); });
            const InteractionEvent e{AgentId{order[i]}, AgentId{order[j]}, result.counterexample.size()};
            result.counterexample.push_back(e);
            protocol.interact(agents[e.initiator.index], agents[e.responder.index]);
            agents[e.initiator.index] = rest(agents[e.initiator.index]);
            agents[e.responder.index] = rest(agents[e.responder.index]);
        }
    };

    std::array<StateId, kMaxAgents> here{};
    for (std::size_t cursor = 0; cursor < rows.size(); ++cursor) {
        if (rows.size() > max_configs || too_many_states) {
            result.explored = rows.size();
            result.verdict = ClosureVerdict::Inconclusive;
            return result;
        }
        std::copy_n(rows.row(cursor), n, here.begin());
        for (std::size_t i = 0; i < n; ++i) {
            // Agents with equal states are interchangeable: use the first of each run.
            if (i > 0 && here[i] == here[i - 1]) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || (j > 0 && here[j] == here[j - 1] && j - 1 != i)) {
                    continue;
                }
                const std::uint64_t m = move(here[i], here[j]);
                if ((m & kUnsafe) != 0) {
                    result.explored = rows.size();
                    result.verdict = ClosureVerdict::Unsafe;
                    replay(cursor, {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j)});
                    return result;
                }
                StateId* next = rows.scratch();
                std::copy_n(here.begin(), n, next);
                next[i] = static_cast<StateId>(m >> 16);
                next[j] = static_cast<StateId>(m);
                std::sort(next, next + n);
                if (table.insert(static_cast<std::uint32_t>(rows.size()))) {
                    rows.commit();
                    parent.push_back(static_cast<std::uint32_t>(cursor));
                    via.push_back({static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j)});
                }
            }
        }
    }
    result.explored = rows.size();
    result.verdict = ClosureVerdict::Safe;
    return result;
}

template <EncodableProtocol P>
ClosureResult verify_closure(const P& protocol, std::span<const StateOf<P>> start, std::size_t max_configs = 4'000'000)
{
    const std::vector<std::vector<StateOf<P>>> starts{std::vector<StateOf<P>>(start.begin(), start.end())};
    return verify_closure(protocol, std::span<const std::vector<StateOf<P>>>(starts), max_configs);
}

// ---- State counts -------------------------------------------------------------

struct StateCountRow {
    pll::Params params;
    pll::StateCount count;
};

inline std::vector<StateCountRow> count_states_report(std::span<const int> m_values)
{
    std::vector<StateCountRow> rows;
    for (int m : m_values) {
        const auto p = pll::params_from_m(m);
        rows.push_back({p, pll::count_states(p)});
    }
    return rows;
}

// ---- Per-step invariants ----------------------------------------------------

/// Observer that mirrors the configuration and checks, after every step,
/// the protocol-level invariants of the logarithmic election (and its
/// symmetric variant): leaders never increase and never vanish, followers
/// stay followers, A/B status is permanent, epochs never decrease and are
/// shared by the two participants, every state is internally consistent,
/// the status proportions hold once nobody is unassigned, and (symmetric
/// variant) F0 and F1 coins are equally many. Also tallies the coins read
/// by leaders meeting F0/F1 followers.
template <class Protocol>
class InvariantMonitor {
public:
    using State = StateOf<Protocol>;
    static constexpr bool kSymmetric = std::is_same_v<State, pll_sym::State>;

    InvariantMonitor(const Protocol& protocol, const Configuration<State>& config)
        : params_(protocol.params()), mirror_(config.states)
    {
        for (const State& s : mirror_) {
            tally(s, +1);
        }
    }

    void operator()(const InteractionEvent& e, const State& s0, const State& s1)
    {
        ++steps_;
        State& old0 = mirror_[e.initiator.index];
        State& old1 = mirror_[e.responder.index];
        if constexpr (kSymmetric) {
            tally_flip(old0, old1);
            tally_flip(old1, old0);
        }
        check_agent(old0, s0, e);
        check_agent(old1, s1, e);
        if (epoch_of(s0) != epoch_of(s1)) {
            fail(e, "participants left the interaction in different epochs");
        }
        const std::size_t before = leaders_;
        tally(old0, -1);
        tally(old1, -1);
        tally(s0, +1);
        tally(s1, +1);
        old0 = s0;
        old1 = s1;
        if (leaders_ > before) {
            fail(e, "leader count increased");
        }
        if (leaders_ == 0) {
            fail(e, "no leader left");
        }
        if (unassigned_ == 0) {
            const std::size_t n = mirror_.size();
            if (2 * candidates_ < n || 2 * (n - leaders_) < n || timers_ == 0) {
                fail(e, "status proportions violated after assignment");
            }
        }
        if constexpr (kSymmetric) {
            if (coins_[3] != coins_[4]) {
                fail(e, "F0/F1 balance broken");
            }
        }
    }

    bool ok() const noexcept { return violations_ == 0; }
    std::uint64_t steps() const noexcept { return steps_; }
    std::uint64_t violations() const noexcept { return violations_; }
    const std::vector<std::string>& messages() const noexcept { return messages_; }
    std::size_t leaders() const noexcept { return leaders_; }
    std::uint64_t heads() const noexcept { return heads_; }
    std::uint64_t tails() const noexcept { return tails_; }
    std::size_t coin_count(pll_sym::Coin c) const noexcept { return coins_[static_cast<std::size_t>(c)]; }

private:
    static int epoch_of(const State& s) { return core(s).common.epoch; }
    static bool unassigned(const State& s) { return core(s).common.status == pll::Status::X; }

    void tally(const State& s, int delta)
    {
        const auto d = static_cast<std::size_t>(delta);
        const pll::State& c = core(s);
        leaders_ += c.common.leader ? d : 0;
        unassigned_ += c.common.status == pll::Status::X ? d : 0;
        candidates_ += c.common.status == pll::Status::A ? d : 0;
        timers_ += c.common.status == pll::Status::B ? d : 0;
        if constexpr (kSymmetric) {
            coins_[static_cast<std::size_t>(s.coin)] += d;
        }
    }

    void tally_flip(const State& leader, const State& partner)
    {
        if constexpr (kSymmetric) {
            if (pll_sym::is_leader(leader) && !unassigned(leader) && pll_sym::is_follower(partner)) {
                heads_ += partner.coin == pll_sym::Coin::F0 ? 1 : 0;
                tails_ += partner.coin == pll_sym::Coin::F1 ? 1 : 0;
            }
        }
    }

    void check_agent(const State& before, const State& after, const InteractionEvent& e)
    {
        const auto& b = core(before).common;
        const auto& a = core(after).common;
        if (!is_consistent(after, params_)) {
            fail(e, "state violates group consistency or a domain cap");
        }
        if (b.status != pll::Status::X && a.status != b.status) {
            fail(e, "status changed after assignment");
        }
        if (a.epoch < b.epoch) {
            fail(e, "epoch decreased");
        }
        if (!b.leader && a.leader) {
            fail(e, "follower became a leader");
        }
    }

    void fail(const InteractionEvent& e, const char* what)
    {
        ++violations_;
        if (messages_.size() < 16) {
            messages_.push_back("step " + std::to_string(e.step) + " (" + std::to_string(e.initiator.index) + "," +
                                std::to_string(e.responder.index) + "): " + what);
        }
    }

    pll::Params params_;
    std::vector<State> mirror_;
    std::size_t leaders_ = 0;
    std::size_t unassigned_ = 0;
    std::size_t candidates_ = 0;
    std::size_t timers_ = 0;
    std::array<std::size_t, 5> coins_{};
    std::uint64_t heads_ = 0;
    std::uint64_t tails_ = 0;
    std::uint64_t steps_ = 0;
    std::uint64_t violations_ = 0;
    std::vector<std::string> messages_;
};

}  // namespace popleader::analysis
