// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "agentlab/bench.hpp"
#include "agentlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace agentlab::testing
{

#ifndef AGENTLAB_FIXTURE_DIR
#define AGENTLAB_FIXTURE_DIR "fixtures"
#endif

/// Loaded once per process; the bundle is immutable.
inline const Bundle& fixture_bundle()
{
    static const Bundle bundle = load_bundle(AGENTLAB_FIXTURE_DIR);
    return bundle;
}

inline const Task& first_task(std::string_view intent)
{
    for (const auto& t: fixture_bundle().tasks)
        if (t.intent == intent)
            return t;
    throw Error("no fixture task with intent " + std::string(intent));
}

inline double rel_error(double analytic, double numeric)
{
    return std::abs(analytic - numeric) / std::max({ 1.0, std::abs(analytic), std::abs(numeric) });
}

inline Step thought_step(std::string thought, Action action, Observation observation)
{
    return Step { std::move(thought), std::move(action), std::move(observation) };
}

} // namespace agentlab::testing

namespace agentlab::testing
{

/// Central differences of f over every entry of the given feature rows.
template <typename F>
Gradient numeric_gradient(Policy p, const std::vector<std::string>& keys, F&& f, double h = 1e-5)
{
    auto g = Gradient {};
    for (const auto& key: keys)
    {
        auto& out = g[key];
        out.assign(p.space().size(), 0.0);
        for (std::size_t a = 0; a < p.space().size(); ++a)
        {
            auto const saved = p.row(key)[a];
            p.row(key)[a] = saved + h;
            auto const up = f(p);
            p.row(key)[a] = saved - h;
            auto const down = f(p);
            p.row(key)[a] = saved;
            out[a] = (up - down) / (2.0 * h);
        }
    }
    return g;
}

/// ||a - b|| / max(||a||, ||b||) over the union of keys; 0 when both vanish.
inline double gradient_rel_error(const Gradient& a, const Gradient& b)
{
    auto diff = a;
    add_scaled(diff, b, -1.0);
    auto const scale = std::max(std::sqrt(dot(a, a)), std::sqrt(dot(b, b)));
    return scale == 0.0 ? 0.0 : std::sqrt(dot(diff, diff)) / scale;
}

inline std::vector<std::string> visited_keys(const std::vector<Decision>& decisions)
{
    auto keys = std::vector<std::string> {};
    for (const auto& d: decisions)
        for (const auto& k: d.features)
            if (std::find(keys.begin(), keys.end(), k) == keys.end())
                keys.push_back(k);
    return keys;
}

} // namespace agentlab::testing
