#include "cli.hpp"

#include "popleader/popleader.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace popleader::cli {
namespace {

using Json = nlohmann::ordered_json;
using Cell = std::variant<std::int64_t, std::uint64_t, double, bool, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct Report {
    std::string command;
    Json config = Json::object();
    std::vector<Table> tables;  // "rows" first, then optional "aggregates"
};

std::string csv_cell(const Cell& c)
{
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.6f", v);
                return buf;
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (v.find_first_of(",\"\n") == std::string::npos) {
                    return v;
                }
                std::string quoted = "\"";
                for (char ch : v) {
                    quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
                }
                return quoted + "\"";
            } else {
                return std::to_string(v);
            }
        },
        c);
}

std::string render_csv(const Report& r)
{
    std::string out;
    for (std::size_t t = 0; t < r.tables.size(); ++t) {
        if (t > 0) {
            out += '\n';
        }
        const Table& table = r.tables[t];
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
            out += (i ? "," : "") + table.columns[i];
        }
        out += '\n';
        for (const auto& row : table.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                out += (i ? "," : "") + csv_cell(row[i]);
            }
            out += '\n';
        }
    }
    return out;
}

std::string render_json(const Report& r)
{
    Json doc;
    doc["schema_version"] = 1;
    doc["command"] = r.command;
    doc["config"] = r.config;
    for (const Table& table : r.tables) {
        Json rows = Json::array();
        for (const auto& row : table.rows) {
            Json obj = Json::object();
            for (std::size_t i = 0; i < row.size(); ++i) {
                std::visit([&](const auto& v) { obj[table.columns[i]] = v; }, row[i]);
            }
            rows.push_back(std::move(obj));
        }
        doc[table.name] = std::move(rows);
    }
    return doc.dump(2) + "\n";
}

struct Options {
    std::string protocol = "pll";
    std::size_t n = 64;
    int m = 0;  // 0: max(2, ceil(log2 n))
    std::uint64_t seed = 1;
    std::size_t trials = 10;
    std::uint64_t max_steps = 0;  // 0: 500 n ceil(log2 n)
    std::string format = "csv";
    std::string out;
    unsigned jobs = analysis::default_jobs();
    std::size_t subset = 0;   // epidemic: 0 means n
    std::uint64_t t = 0;      // epidemic: 0 means floor(3 n ln n)
    std::vector<int> m_list{8, 16, 32, 64};
    std::vector<std::size_t> n_list;
    std::size_t max_configs = 4'000'000;

    int m_for(std::size_t pop) const { return m != 0 ? m : pll::default_m(pop); }
    std::vector<std::size_t> populations() const { return n_list.empty() ? std::vector<std::size_t>{n} : n_list; }
};

Json base_config(const Options& o)
{
    Json c = Json::object();
    c["protocol"] = o.protocol;
    c["seed"] = o.seed;
    c["trials"] = o.trials;
    c["max_steps"] = o.max_steps;
    return c;
}

Json population_config(const Options& o)
{
    Json c = base_config(o);
    Json ns = Json::array();
    Json ms = Json::array();
    for (std::size_t pop : o.populations()) {
        ns.push_back(pop);
        ms.push_back(o.protocol == "baseline" ? 0 : o.m_for(pop));
    }
    c["n"] = ns;
    c["m"] = ms;
    return c;
}

void check_population(const Options& o, std::size_t pop, std::ostream& err)
{
    if (pop < 2) {
        throw InvalidPopulation("n must be at least 2");
    }
    if (o.protocol == "pll-sym" && pop < 3) {
        throw InvalidPopulation("pll-sym needs n >= 3: with two agents the X/Y exchange never ends");
    }
    if (o.protocol != "baseline" && o.m != 0 && o.m < ceil_log2(pop)) {
        err << "warning: m=" << o.m << " is below ceil(log2 n)=" << ceil_log2(pop) << " for n=" << pop
            << "; proceeding\n";
    }
}

/// Calls fn(protocol) with the protocol object selected by --protocol.
template <class Fn>
decltype(auto) with_protocol(const Options& o, std::size_t pop, Fn&& fn)
{
    if (o.protocol == "baseline") {
        return fn(baseline::PairwiseElimination{});
    }
    if (o.protocol == "pll-sym") {
        return fn(pll_sym::SymmetricLeaderElection(o.m_for(pop)));
    }
    return fn(pll::LeaderElection(o.m_for(pop)));
}

std::vector<analysis::StabilizationReport> stabilization_runs(const Options& o, std::size_t pop)
{
    analysis::StabilizationOptions so;
    so.max_steps = o.max_steps;
    return with_protocol(o, pop, [&](const auto& p) { return analysis::measure_many(p, pop, o.trials, o.seed, so, o.jobs); });
}

int cmd_stabilize(const Options& o, Report& r, std::ostream& err)
{
    r.config = population_config(o);
    Table rows{"rows", {"n", "trial", "seed", "converged", "steps", "parallel_time"}, {}};
    Table agg{"aggregates",
              {"n", "trials", "converged", "mean_parallel_time", "median_parallel_time", "p95_parallel_time",
               "mean_over_ln_n"},
              {}};
    bool all_converged = true;
    for (std::size_t pop : o.populations()) {
        check_population(o, pop, err);
        const auto reports = stabilization_runs(o, pop);
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const auto& rep = reports[i];
            rows.rows.push_back({std::uint64_t{pop}, std::uint64_t{i}, rep.seed, rep.converged, rep.convergence_step,
                                 rep.parallel_time});
        }
        const auto s = analysis::summarize(reports);
        all_converged = all_converged && s.converged == s.trials;
        agg.rows.push_back({std::uint64_t{pop}, std::uint64_t{s.trials}, std::uint64_t{s.converged},
                            s.mean_parallel_time, s.median_parallel_time, s.p95_parallel_time,
                            s.mean_parallel_time / std::log(static_cast<double>(pop))});
    }
    r.tables = {std::move(rows), std::move(agg)};
    return all_converged ? kOk : kInconclusive;
}

int cmd_survivors(const Options& o, Report& r, std::ostream& err)
{
    if (o.protocol != "pll") {
        throw InvalidParameter("survivors is defined for --protocol pll only");
    }
    check_population(o, o.n, err);
    const int m = o.m_for(o.n);
    const auto h = analysis::survivor_histogram(o.n, m, o.trials, o.seed, o.jobs);
    r.config = base_config(o);
    r.config["n"] = o.n;
    r.config["m"] = m;
    r.config["horizon_step"] = h.horizon_step;

    Table rows{"rows", {"i", "count", "empirical_p", "bound", "pass"}, {}};
    std::size_t last = 5;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        if (h.counts[i] != 0) {
            last = std::max(last, i);
        }
    }
    bool ok = true;
    for (std::size_t i = 0; i <= std::min(last, o.n); ++i) {
        const double p = h.fraction(i);
        const double bound = i == 0 ? 0.0 : analysis::survivor_bound(i);
        const bool pass =
            i == 0 ? h.counts[0] == 0 : p <= bound + analysis::statistical_slack(std::min(1.0, bound), o.trials);
        ok = ok && pass;
        rows.rows.push_back({std::uint64_t{i}, std::uint64_t{h.counts[i]}, p, bound, pass});
    }
    r.tables = {std::move(rows)};
    return ok ? kOk : kCheckFailed;
}

int cmd_epidemic(const Options& o, Report& r, std::ostream&)
{
    const std::size_t subset = o.subset != 0 ? o.subset : o.n;
    const std::uint64_t t = o.t != 0 ? o.t : analysis::default_epidemic_t(o.n);
    const auto rep = analysis::epidemic_bound_check(o.n, subset, o.trials, t, o.seed, o.jobs);
    r.config = Json::object();
    r.config["seed"] = o.seed;
    r.config["trials"] = o.trials;
    r.config["n"] = o.n;
    r.config["subset"] = subset;
    r.config["t"] = t;
    const double bound = std::min(1.0, rep.analytic_bound);
    const bool pass = rep.empirical_rate <= bound + analysis::statistical_slack(bound, o.trials);
    r.tables = {Table{"rows",
                      {"n", "subset", "t", "horizon", "trials", "failures", "empirical_rate", "analytic_bound", "pass"},
                      {{std::uint64_t{rep.n}, std::uint64_t{rep.subset}, rep.t, rep.horizon, std::uint64_t{rep.trials},
                        std::uint64_t{rep.failures}, rep.empirical_rate, rep.analytic_bound, pass}}}};
    return pass ? kOk : kCheckFailed;
}

int cmd_states(const Options& o, Report& r, std::ostream&)
{
    r.config = Json::object();
    r.config["protocol"] = o.protocol;
    r.config["m"] = o.m_list;
    Table rows{"rows",
               {"m", "level_max", "count_max", "phi", "initial", "timer", "quick", "tournament", "backup", "total",
                "ratio"},
               {}};
    bool ok = true;
    std::uint64_t previous = 0;
    for (const auto& row : analysis::count_states_report(o.m_list)) {
        std::uint64_t total = row.count.total();
        if (o.protocol == "pll-sym") {
            total = pll_sym::enumerate_states(row.params).size();
        }
        const double ratio = previous == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(previous);
        ok = ok && total > previous;
        previous = total;
        rows.rows.push_back({std::int64_t{row.params.m}, std::int64_t{row.params.level_max},
                             std::int64_t{row.params.count_max}, std::int64_t{row.params.phi}, row.count.initial,
                             row.count.timer, row.count.quick, row.count.tournament, row.count.backup, total, ratio});
    }
    r.tables = {std::move(rows)};
    return ok ? kOk : kCheckFailed;
}

std::string schedule_text(const std::vector<InteractionEvent>& events)
{
    std::string s;
    for (const auto& e : events) {
        s += (s.empty() ? "" : " ") + std::to_string(e.initiator.index) + ">" + std::to_string(e.responder.index);
    }
    return s;
}

int cmd_verify(const Options& o, Report& r, std::ostream& err)
{
    check_population(o, o.n, err);
    if (o.n > 8) {
        throw InvalidPopulation("verify supports at most 8 agents");
    }
    r.config = base_config(o);
    r.config["n"] = o.n;
    r.config["m"] = o.protocol == "baseline" ? 0 : o.m_for(o.n);
    r.config["max_configs"] = o.max_configs;

    return with_protocol(o, o.n, [&](const auto& p) {
        using State = StateOf<std::decay_t<decltype(p)>>;
        const std::uint64_t max_steps = o.max_steps != 0 ? o.max_steps : default_max_steps(o.n);
        std::vector<std::vector<State>> starts;
        Table rows{"rows", {"trial", "seed", "converged", "convergence_step", "leaders"}, {}};
        bool converged = true;
        for (std::size_t i = 0; i < o.trials; ++i) {
            const std::uint64_t seed = derive_seed(o.seed, i);
            RandomSource rng(seed);
            auto config = initial_configuration(p, o.n);
            const auto res = run(p, config, rng, SingleLeader{}, max_steps);
            converged = converged && res.stopped;
            rows.rows.push_back({std::uint64_t{i}, seed, res.stopped, res.steps, std::uint64_t{config.leaders}});
            starts.push_back(config.states);
        }
        const auto verdict =
            analysis::verify_closure(p, std::span<const std::vector<State>>(starts), o.max_configs);
        Table agg{"aggregates", {"verdict", "explored", "counterexample_trial", "counterexample"}, {}};
        const bool unsafe = verdict.verdict == analysis::ClosureVerdict::Unsafe;
        agg.rows.push_back({std::string(analysis::to_string(verdict.verdict)), verdict.explored,
                            unsafe ? std::int64_t(verdict.start_index) : std::int64_t{-1},
                            schedule_text(verdict.counterexample)});
        r.tables = {std::move(rows), std::move(agg)};
        if (!converged || verdict.verdict == analysis::ClosureVerdict::Inconclusive) {
            return int{kInconclusive};
        }
        return verdict.safe() ? int{kOk} : int{kCheckFailed};
    });
}

int cmd_compare(const Options& o, Report& r, std::ostream& err)
{
    Options pll_opts = o;
    pll_opts.protocol = "pll";
    Options base_opts = o;
    base_opts.protocol = "baseline";
    r.config = population_config(pll_opts);
    r.config.erase("protocol");
    Table rows{"rows",
               {"n", "m", "trials", "pll_mean", "pll_median", "baseline_mean", "baseline_median", "speedup", "pass"},
               {}};
    bool ok = true;
    bool converged = true;
    for (std::size_t pop : o.populations()) {
        check_population(pll_opts, pop, err);
        const auto a = analysis::summarize(stabilization_runs(pll_opts, pop));
        const auto b = analysis::summarize(stabilization_runs(base_opts, pop));
        converged = converged && a.converged == a.trials && b.converged == b.trials;
        const bool pass = a.mean_parallel_time < b.mean_parallel_time;
        ok = ok && pass;
        rows.rows.push_back({std::uint64_t{pop}, std::int64_t{o.m_for(pop)}, std::uint64_t{o.trials},
                             a.mean_parallel_time, a.median_parallel_time, b.mean_parallel_time, b.median_parallel_time,
                             a.mean_parallel_time > 0 ? b.mean_parallel_time / a.mean_parallel_time : 0.0, pass});
    }
    r.tables = {std::move(rows)};
    if (!converged) {
        return kInconclusive;
    }
    return ok ? kOk : kCheckFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Population-protocol leader election experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value file that pre-populates flags");

    Options o;
    app.add_option("--protocol", o.protocol, "Protocol to run")
        ->check(CLI::IsMember({"pll", "pll-sym", "baseline"}))
        ->capture_default_str();
    app.add_option("--n", o.n, "Population size")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 28))->capture_default_str();
    app.add_option("--m", o.m, "Rough knowledge of n (default max(2, ceil(log2 n)))")->check(CLI::Range(2, 100000));
    app.add_option("--seed", o.seed, "Master seed")->capture_default_str();
    app.add_option("--trials", o.trials, "Number of trials")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--max-steps", o.max_steps, "Step budget per trial (default 500 n ceil(log2 n))");
    app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app.add_option("--out", o.out, "Output file (default stdout)");
    app.add_option("--jobs", o.jobs, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
    app.add_option("--subset", o.subset, "epidemic: size of the infectable subset V' (default n)");
    app.add_option("--t", o.t, "epidemic: t of the bound n e^{-t/n} (default floor(3 n ln n))");
    app.add_option("--m-list", o.m_list, "states: values of m")->delimiter(',')->check(CLI::Range(2, 100000));
    app.add_option("--n-list", o.n_list, "stabilize/compare: population sizes")->delimiter(',')->check(CLI::Range(std::size_t{2}, std::size_t{1} << 28));
    app.add_option("--max-configs", o.max_configs, "verify: exploration budget")->capture_default_str();

    struct Command {
        const char* name;
        const char* help;
        int (*fn)(const Options&, Report&, std::ostream&);
    };
    const Command commands[] = {
        {"stabilize", "Stabilization time per trial with aggregates", cmd_stabilize},
        {"survivors", "Leaders left after QuickElimination vs. the 2^(1-i) bound", cmd_survivors},
        {"epidemic", "One-way epidemic completion vs. the n e^(-t/n) bound", cmd_epidemic},
        {"states", "Per-agent state counts for each m", cmd_states},
        {"verify", "Exhaustive closure check of converged small configurations", cmd_verify},
        {"compare", "P_LL vs. pairwise-elimination parallel time", cmd_compare},
    };
    const Command* chosen = nullptr;
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->fallthrough();
        sub->callback([&chosen, &c] { chosen = &c; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    Report report;
    report.command = chosen->name;
    int code = kOk;
    try {
        code = chosen->fn(o, report, err);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    const std::string text = o.format == "json" ? render_json(report) : render_csv(report);
    if (o.out.empty() || o.out == "-") {
        out << text;
    } else {
        std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
        if (!file) {
            err << "error: cannot open " << o.out << " for writing\n";
            return kUsage;
        }
        file << text;
    }
    return code;
}

}  // namespace popleader::cli
