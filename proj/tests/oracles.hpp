#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond the state types they translate to and from.

#include "popleader/pll.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

struct Params {
    int m, level_max, count_max, phi;
};

inline Params params(int m)
{
    // Floating-point route on purpose: the library computes phi in integers.
    const double phi = std::ceil(2.0 * std::log2(static_cast<double>(m)) / 3.0 - 1e-12);
    return {m, 5 * m, 41 * m, static_cast<int>(phi)};
}

// Every variable of the listing in one flat record; fields that do not
// belong to the agent's current group are kept at zero.
struct Agent {
    char status = 'X';
    bool leader = true;
    bool tick = false;
    int epoch = 1;
    int init = 1;
    int color = 0;
    int count = 0;
    int level_q = 0;
    bool done = false;
    int rand = 0;
    int index = 0;
    int level_b = 0;

    friend bool operator==(const Agent&, const Agent&) = default;
};

inline void interact(Agent& a0, Agent& a1, const Params& p)
{
    Agent* a[2] = {&a0, &a1};
    auto clear_group = [](Agent& v) { v.count = v.level_q = v.rand = v.index = v.level_b = 0, v.done = false; };

    if (a0.status == 'X' && a1.status == 'X') {
        clear_group(a0);
        clear_group(a1);
        a0.status = 'A', a0.level_q = 0, a0.done = false, a0.leader = true;
        a1.status = 'B', a1.count = 0, a1.leader = false;
    } else {
        for (int i = 0; i < 2; ++i) {
            if (a[i]->status == 'X' && a[1 - i]->status != 'X') {
                clear_group(*a[i]);
                a[i]->status = 'A', a[i]->level_q = 0, a[i]->done = true, a[i]->leader = false;
            }
        }
    }
    a0.tick = a1.tick = false;

    // CountUp
    for (int i = 0; i < 2; ++i) {
        if (a[i]->status == 'B') {
            a[i]->count = (a[i]->count + 1) % p.count_max;
            if (a[i]->count == 0) {
                a[i]->color = (a[i]->color + 1) % 3;
                a[i]->tick = true;
            }
        }
    }
    for (int i = 0; i < 2; ++i) {
        if (a[1 - i]->color == (a[i]->color + 1) % 3) {
            a[i]->color = a[1 - i]->color;
            a[i]->tick = true;
            if (a[i]->status == 'B') {
                a[i]->count = 0;
            }
            break;
        }
    }

    for (int i = 0; i < 2; ++i) {
        if (a[i]->tick) {
            a[i]->epoch = std::min(a[i]->epoch + 1, 4);
        }
    }
    a0.epoch = a1.epoch = std::max(a0.epoch, a1.epoch);
    for (int i = 0; i < 2; ++i) {
        Agent& v = *a[i];
        if (v.epoch > v.init) {
            if (v.status == 'A' && (v.epoch == 2 || v.epoch == 3)) {
                clear_group(v);
                v.rand = 0;
                v.index = v.leader ? 0 : p.phi;  // followers carry a complete nonce
            }
            if (v.status == 'A' && v.epoch == 4) {
                clear_group(v);
                v.level_b = 0;
            }
            v.init = v.epoch;
        }
    }

    const bool cands = a0.status == 'A' && a1.status == 'A';
    if (a0.epoch == 1) {
        for (int i = 0; i < 2; ++i) {
            if (a[i]->leader && !a[1 - i]->leader && !a[i]->done) {
                if (i == 0) {
                    a0.level_q = std::min(a0.level_q + 1, p.level_max);
                } else {
                    a1.done = true;
                }
            }
        }
        if (cands && a0.done && a1.done) {
            for (int i = 0; i < 2; ++i) {
                if (a[i]->level_q < a[1 - i]->level_q) {
                    a[i]->leader = false;
                    a[i]->level_q = a[1 - i]->level_q;
                    break;
                }
            }
        }
    } else if (a0.epoch <= 3) {
        for (int i = 0; i < 2; ++i) {
            if (a[i]->leader && !a[1 - i]->leader && a[i]->index < p.phi) {
                a[i]->rand = (2 * a[i]->rand + i) % (1 << p.phi);
                a[i]->index = std::min(a[i]->index + 1, p.phi);
            }
        }
        if (cands && a0.index == p.phi && a1.index == p.phi) {
            for (int i = 0; i < 2; ++i) {
                if (a[i]->rand < a[1 - i]->rand) {
                    a[i]->leader = false;
                    a[i]->rand = a[1 - i]->rand;
                    break;
                }
            }
        }
    } else {
        if (a0.tick && a0.leader && !a1.leader) {
            a0.level_b = std::min(a0.level_b + 1, p.level_max);
        }
        if (cands) {
            for (int i = 0; i < 2; ++i) {
                if (a[i]->level_b < a[1 - i]->level_b) {
                    a[i]->level_b = a[1 - i]->level_b;
                    a[i]->leader = false;
                    break;
                }
            }
        }
        if (a0.leader && a1.leader) {
            a1.leader = false;
        }
    }
}

inline Agent from_library(const popleader::pll::State& s)
{
    namespace pll = popleader::pll;
    Agent a;
    a.status = s.common.status == pll::Status::X ? 'X' : s.common.status == pll::Status::A ? 'A' : 'B';
    a.leader = s.common.leader;
    a.tick = s.common.tick;
    a.epoch = s.common.epoch;
    a.init = s.common.init;
    a.color = s.common.color;
    if (const auto* t = std::get_if<pll::Timer>(&s.group)) {
        a.count = static_cast<int>(t->count);
    } else if (const auto* q = std::get_if<pll::QuickVars>(&s.group)) {
        a.level_q = static_cast<int>(q->level);
        a.done = q->done;
    } else if (const auto* r = std::get_if<pll::TournVars>(&s.group)) {
        a.rand = static_cast<int>(r->rand);
        a.index = static_cast<int>(r->index);
    } else if (const auto* b = std::get_if<pll::BackupVars>(&s.group)) {
        a.level_b = static_cast<int>(b->level);
    }
    return a;
}

/// |Q| by hand: the free product of each group's domains.
struct Count {
    std::uint64_t initial, timer, quick, tournament, backup;
    std::uint64_t total() const { return initial + timer + quick + tournament + backup; }
};

inline Count closed_form_count(int m)
{
    const Params p = params(m);
    const std::uint64_t colors = 3;
    const std::uint64_t levels = static_cast<std::uint64_t>(p.level_max) + 1;
    return {
        1,
        4 * colors * static_cast<std::uint64_t>(p.count_max),
        2 * colors * levels * 2,
        2 * 2 * colors * (std::uint64_t{1} << p.phi) * static_cast<std::uint64_t>(p.phi + 1),
        2 * colors * levels,
    };
}

/// Brute force over the raw variable domains, filtered by the validity
/// rules of an at-rest agent and deduplicated on the variables that matter
/// for its group. Only practical for small m.
inline std::uint64_t brute_force_count(int m)
{
    const Params p = params(m);
    std::set<std::tuple<char, bool, int, int, int, int, bool, int, int, int>> seen;
    for (char status : {'X', 'A', 'B'}) {
        for (bool leader : {false, true}) {
            for (int epoch = 1; epoch <= 4; ++epoch) {
                for (int color = 0; color < 3; ++color) {
                    for (int count = 0; count < p.count_max; ++count) {
                        for (int level = 0; level <= p.level_max; ++level) {
                            for (bool done : {false, true}) {
                                for (int rand = 0; rand < (1 << p.phi); ++rand) {
                                    for (int index = 0; index <= p.phi; ++index) {
                                        if (status == 'X' && (!leader || epoch != 1 || color != 0)) {
                                            continue;
                                        }
                                        if (status == 'B' && leader) {
                                            continue;
                                        }
                                        const bool uses_count = status == 'B';
                                        const bool uses_q = status == 'A' && epoch == 1;
                                        const bool uses_t = status == 'A' && (epoch == 2 || epoch == 3);
                                        const bool uses_b = status == 'A' && epoch == 4;
                                        seen.emplace(status, leader, epoch, color, uses_count ? count : -1,
                                                     uses_q || uses_b ? level : -1, uses_q && done,
                                                     uses_t ? rand : -1, uses_t ? index : -1, 0);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return seen.size();
}

}  // namespace oracle
