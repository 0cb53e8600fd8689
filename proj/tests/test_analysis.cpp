#include "popleader/popleader.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace popleader;
using namespace popleader::analysis;

// ---- Trial fan-out --------------------------------------------------------------

TEST(RunTrials, ResultsIndependentOfWorkerCount)
{
    auto fn = [](std::size_t i) { return RandomSource(derive_seed(3, i)).next(); };
    EXPECT_EQ(run_trials(64, 1, fn), run_trials(64, 4, fn));
}

TEST(RunTrials, PropagatesExceptions)
{
    EXPECT_THROW(run_trials(8, 2,
                            [](std::size_t i) -> int {
                                if (i == 5) {
                                    throw std::runtime_error("boom");
                                }
                                return 0;
                            }),
                 std::runtime_error);
}

// ---- Stabilization ------------------------------------------------------------------

TEST(Stabilization, SingleLeaderAtConvergenceAndAfterwards)
{
    const pll::LeaderElection protocol(6);
    StabilizationOptions opts;
    opts.follow_through = true;
    opts.max_steps = 200'000;
    const auto reports = measure_many(protocol, 64, 20, 11, opts, 1);
    for (const auto& r : reports) {
        ASSERT_TRUE(r.converged);
        EXPECT_TRUE(r.stayed_single);
        EXPECT_EQ(r.leader_trajectory.front().leaders, 64U);
        bool after = false;
        for (const auto& point : r.leader_trajectory) {
            if (point.step >= r.convergence_step) {
                after = true;
                EXPECT_EQ(point.leaders, 1U);
            }
        }
        EXPECT_TRUE(after);
        EXPECT_DOUBLE_EQ(r.parallel_time, parallel_time(r.convergence_step, 64));
        ASSERT_TRUE(r.epoch_entry[0].has_value());
        for (std::size_t e = 1; e < 4; ++e) {
            if (r.epoch_entry[e] && r.epoch_entry[e - 1]) {
                EXPECT_GE(*r.epoch_entry[e], *r.epoch_entry[e - 1]);
            }
        }
    }
}

TEST(Stabilization, TrajectoryIsNonIncreasing)
{
    const pll::LeaderElection protocol(7);
    const auto r = measure_stabilization(protocol, 100, 5);
    ASSERT_TRUE(r.converged);
    for (std::size_t i = 1; i < r.leader_trajectory.size(); ++i) {
        EXPECT_LE(r.leader_trajectory[i].leaders, r.leader_trajectory[i - 1].leaders);
        EXPECT_GT(r.leader_trajectory[i].step, r.leader_trajectory[i - 1].step);
    }
}

TEST(Stabilization, SummaryUsesConvergedTrialsAndNearestRank)
{
    std::vector<StabilizationReport> reports(4);
    const double times[] = {4.0, 1.0, 3.0, 100.0};
    for (std::size_t i = 0; i < 4; ++i) {
        reports[i].converged = i != 3;
        reports[i].parallel_time = times[i];
    }
    const auto s = summarize(reports);
    EXPECT_EQ(s.trials, 4U);
    EXPECT_EQ(s.converged, 3U);
    EXPECT_DOUBLE_EQ(s.mean_parallel_time, 8.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.median_parallel_time, 3.0);
    EXPECT_DOUBLE_EQ(s.p95_parallel_time, 4.0);
    EXPECT_DOUBLE_EQ(quantile({}, 0.5), 0.0);
}

TEST(Stabilization, BaselineTwoAgentsOneStep)
{
    const baseline::PairwiseElimination protocol;
    const auto r = measure_stabilization(protocol, 2, 1);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.convergence_step, 1U);
}

// ---- Survivors and epidemic -------------------------------------------------------------

TEST(Survivors, HorizonAndBounds)
{
    EXPECT_EQ(survivor_horizon(1024), static_cast<std::uint64_t>(std::floor(21.0 * 1024 * std::log(1024.0))));
    EXPECT_DOUBLE_EQ(survivor_bound(1), 1.0);
    EXPECT_DOUBLE_EQ(survivor_bound(2), 0.5);
    EXPECT_DOUBLE_EQ(survivor_bound(4), 0.125);
    EXPECT_DOUBLE_EQ(statistical_slack(0.5, 2000), 0.05);
    EXPECT_NEAR(statistical_slack(0.5, 100), 0.15, 1e-12);
}

TEST(Survivors, NeverZeroAndRowsSumToTrials)
{
    const auto h = survivor_histogram(128, 7, 200, 3, 1);
    EXPECT_EQ(h.counts[0], 0U);
    std::size_t sum = 0;
    for (std::size_t c : h.counts) {
        sum += c;
    }
    EXPECT_EQ(sum, 200U);
    EXPECT_NEAR(h.tail_fraction(1), 1.0, 1e-12);
    for (std::size_t i = 2; i <= 4; ++i) {
        EXPECT_LE(h.fraction(i), survivor_bound(i) + statistical_slack(survivor_bound(i), 200));
    }
}

TEST(Epidemic, SingleMemberNeverFails)
{
    const auto r = epidemic_bound_check(50, 1, 100, 1, 9, 1);
    EXPECT_EQ(r.failures, 0U);
}

TEST(Epidemic, HorizonFormula)
{
    const auto r = epidemic_bound_check(200, 100, 10, 1000, 9, 1);
    EXPECT_EQ(r.horizon, 2U * 2U * 1000U);
    EXPECT_DOUBLE_EQ(r.analytic_bound, 200.0 * std::exp(-1000.0 / 200.0));
    EXPECT_EQ(default_epidemic_t(500), static_cast<std::uint64_t>(std::floor(1500.0 * std::log(500.0))));
}

// ---- Predicates --------------------------------------------------------------------

TEST(Predicates, InitialConfigurationIsStartZero)
{
    const pll::LeaderElection protocol(4);
    const auto c = initial_configuration(protocol, 10);
    const auto pred = config_predicates(std::span<const pll::State>(c.states));
    EXPECT_TRUE(pred.start[0]);
    EXPECT_FALSE(pred.start[1]);
    EXPECT_TRUE(pred.color_uniform[0]);
    EXPECT_FALSE(pred.b_start);
}

TEST(Predicates, UniformColorOne)
{
    std::vector<pll::State> states(5, pll::initial_state());
    for (auto& s : states) {
        s.common.color = 1;
    }
    const auto pred = config_predicates(std::span<const pll::State>(states));
    EXPECT_TRUE(pred.color_uniform[1]);
    EXPECT_FALSE(pred.color_uniform[0]);
}

TEST(Predicates, StartRequiresIdleTimersOfThatColor)
{
    pll::State t;
    pll::make_timer(t);
    t.common.color = 1;
    std::get<pll::Timer>(t.group).count = 0;
    std::vector<pll::State> states{t, pll::initial_state()};
    EXPECT_TRUE(config_predicates(std::span<const pll::State>(states)).start[1]);
    std::get<pll::Timer>(states[0].group).count = 4;
    EXPECT_FALSE(config_predicates(std::span<const pll::State>(states)).start[1]);
}

TEST(Predicates, BStart)
{
    pll::State a;
    pll::make_candidate(a, true, false);
    a.common.epoch = a.common.init = 4;
    a.group = pll::BackupVars{1};
    pll::State t;
    pll::make_timer(t);
    t.common.epoch = t.common.init = 4;
    std::vector<pll::State> states{a, t};
    EXPECT_TRUE(config_predicates(std::span<const pll::State>(states)).b_start);
    std::get<pll::BackupVars>(states[0].group).level = 2;
    EXPECT_FALSE(config_predicates(std::span<const pll::State>(states)).b_start);
}

TEST(Predicates, TracedRunsReachStartOneQuickly)
{
    // The first timer rollover puts the population in C_start(1); that state
    // lasts until the timer's next interaction, so it is tracked per step.
    constexpr std::size_t n = 1024;
    const pll::LeaderElection protocol(10);
    const double budget = protocol.params().count_max;  // parallel time, Theta(log n)
    std::size_t hits = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        RandomSource rng(derive_seed(2024, trial));
        auto config = initial_configuration(protocol, n);
        std::array<std::size_t, 3> with_color{n, 0, 0};
        std::size_t busy_color1_timers = 0;
        auto counts_busy = [](const pll::State& s) {
            const auto* t = std::get_if<pll::Timer>(&s.group);
            return pll::is_timer(s) && s.common.color == 1 && t != nullptr && t->count != 0;
        };
        std::vector<pll::State> mirror = config.states;
        bool reached = false;
        auto stop = [&](const Configuration<pll::State>&) { return reached; };
        run(protocol, config, rng, stop, static_cast<std::uint64_t>(budget * n),
            [&](const InteractionEvent& e, const pll::State& s0, const pll::State& s1) {
                pll::State& old0 = mirror[e.initiator.index];
                pll::State& old1 = mirror[e.responder.index];
                for (const pll::State* s : {&old0, &old1}) {
                    --with_color[s->common.color];
                    busy_color1_timers -= counts_busy(*s) ? 1 : 0;
                }
                for (const pll::State* s : {&s0, &s1}) {
                    ++with_color[s->common.color];
                    busy_color1_timers += counts_busy(*s) ? 1 : 0;
                }
                old0 = s0;
                old1 = s1;
                reached = with_color[1] > 0 && with_color[2] == 0 && busy_color1_timers == 0;
            });
        if (reached) {
            ++hits;
            EXPECT_TRUE(config_predicates(std::span<const pll::State>(config.states)).start[1]);
        }
    }
    EXPECT_GE(hits, 95U);
}

namespace {

// A leader is only demoted by a follower that has been touched twice.
struct Slow {
    struct State {
        bool leader = true;
        int touched = 0;
        friend bool operator==(const State&, const State&) = default;
    };
    State initial_state() const { return {}; }
    void interact(State& a, State& b) const
    {
        if (!b.leader) {
            b.touched = std::min(b.touched + 1, 2);
        }
        if (a.leader && b.touched == 2) {
            a.leader = false;
        }
    }
    Output output(const State& s) const { return s.leader ? Output::Leader : Output::Follower; }
    std::uint64_t encode(const State& s) const { return (s.leader ? 1U : 0U) | (static_cast<unsigned>(s.touched) << 1); }
    State decode(std::uint64_t c) const { return {(c & 1) != 0, static_cast<int>(c >> 1)}; }
};

}  // namespace

// ---- Closure -----------------------------------------------------------------------

TEST(Closure, BaselineSingleLeaderSafeForSmallN)
{
    const baseline::PairwiseElimination p;
    for (std::size_t n = 2; n <= 4; ++n) {
        std::vector<baseline::State> states(n, baseline::State{false});
        states[n - 1].leader = true;
        const auto r = verify_closure(p, std::span<const baseline::State>(states));
        EXPECT_EQ(r.verdict, ClosureVerdict::Safe) << n;
        EXPECT_TRUE(r.counterexample.empty());
    }
}

TEST(Closure, BaselineTwoLeadersUnsafeWithOneStepCounterexample)
{
    const baseline::PairwiseElimination p;
    const std::vector<baseline::State> states{{false}, {true}, {true}};
    const auto r = verify_closure(p, std::span<const baseline::State>(states));
    ASSERT_EQ(r.verdict, ClosureVerdict::Unsafe);
    ASSERT_EQ(r.counterexample.size(), 1U);
    const auto e = r.counterexample[0];
    EXPECT_TRUE(states[e.initiator.index].leader);
    EXPECT_TRUE(states[e.responder.index].leader);
}

TEST(Closure, CounterexampleReplaysInOriginalIds)
{
    const Slow p;
    const std::vector<Slow::State> start{{false, 0}, {true, 0}, {false, 0}};
    const auto r = verify_closure(p, std::span<const Slow::State>(start));
    ASSERT_EQ(r.verdict, ClosureVerdict::Unsafe);
    ASSERT_FALSE(r.counterexample.empty());
    auto config = make_configuration(p, start);
    for (const auto& e : r.counterexample) {
        step(p, config, e);
    }
    EXPECT_EQ(config.leaders, 0U);
    EXPECT_EQ(r.counterexample.size(), 2U);
}

TEST(Closure, InconclusiveWhenBudgetExceeded)
{
    const pll::LeaderElection p(2);
    RandomSource rng(1);
    auto c = initial_configuration(p, 3);
    run(p, c, rng, SingleLeader{}, 10'000);
    const auto r = verify_closure(p, std::span<const pll::State>(c.states), 100);
    EXPECT_EQ(r.verdict, ClosureVerdict::Inconclusive);
    EXPECT_FALSE(r.safe());
}

TEST(Closure, ConvergedPllConfigurationsAtThreeAgentsAreSafe)
{
    const pll::LeaderElection p(2);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RandomSource rng(derive_seed(8, seed));
        auto c = initial_configuration(p, 3);
        ASSERT_TRUE(run(p, c, rng, SingleLeader{}, 10'000).stopped);
        const auto r = verify_closure(p, std::span<const pll::State>(c.states));
        EXPECT_EQ(r.verdict, ClosureVerdict::Safe) << seed;
    }
}

TEST(Closure, TwoPllLeadersAreUnsafe)
{
    const pll::LeaderElection p(2);
    const auto c = initial_configuration(p, 3);
    const auto r = verify_closure(p, std::span<const pll::State>(c.states));
    ASSERT_EQ(r.verdict, ClosureVerdict::Unsafe);
    auto config = c;
    for (const auto& e : r.counterexample) {
        step(p, config, e);
    }
    EXPECT_LT(config.leaders, 3U);
}

TEST(Closure, RejectsOversizedPopulations)
{
    const baseline::PairwiseElimination p;
    const std::vector<baseline::State> big(9);
    EXPECT_THROW(verify_closure(p, std::span<const baseline::State>(big)), InvalidPopulation);
}

// ---- State-count report -----------------------------------------------------------

TEST(StateCounts, MonotoneAndRoughlyLinear)
{
    const int ms[] = {8, 16, 32, 64};
    const auto rows = count_states_report(ms);
    ASSERT_EQ(rows.size(), 4U);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double ratio = static_cast<double>(rows[i].count.total()) / static_cast<double>(rows[i - 1].count.total());
        EXPECT_GT(ratio, 1.0);
        EXPECT_LE(ratio, 2.5);
    }
}

// ---- Invariant monitor ---------------------------------------------------------------

TEST(Monitor, CleanOnPllAndSymmetricRuns)
{
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const pll::LeaderElection p(6);
        RandomSource rng(seed);
        auto c = initial_configuration(p, 60);
        InvariantMonitor monitor(p, c);
        run(p, c, rng, Never{}, 50'000, monitor);
        EXPECT_TRUE(monitor.ok()) << (monitor.messages().empty() ? "" : monitor.messages()[0]);
        EXPECT_EQ(monitor.steps(), 50'000U);

        const pll_sym::SymmetricLeaderElection q(6);
        RandomSource rng2(seed);
        auto d = initial_configuration(q, 60);
        InvariantMonitor sym_monitor(q, d);
        run(q, d, rng2, Never{}, 50'000, sym_monitor);
        EXPECT_TRUE(sym_monitor.ok()) << (sym_monitor.messages().empty() ? "" : sym_monitor.messages()[0]);
        EXPECT_GT(sym_monitor.heads() + sym_monitor.tails(), 0U);
    }
}

TEST(Monitor, FlagsARevivedLeader)
{
    struct Reviving {
        using State = pll::State;
        pll::Params p = pll::params_from_m(4);
        const pll::Params& params() const { return p; }
        State initial_state() const { return pll::initial_state(); }
        void interact(State& a, State& b) const
        {
            pll::interact(a, b, p);
            if (!a.common.leader && !b.common.leader && pll::is_candidate(a)) {
                a.common.leader = true;
            }
        }
        Output output(const State& s) const { return pll::output(s); }
    };
    const Reviving p;
    RandomSource rng(3);
    auto c = initial_configuration(p, 20);
    InvariantMonitor monitor(p, c);
    run(p, c, rng, Never{}, 5'000, monitor);
    EXPECT_FALSE(monitor.ok());
    ASSERT_FALSE(monitor.messages().empty());
}
