#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <vector>

#include "qgraph/metric_graph.hpp"

namespace qgraph {

/// Closed-form spectral gaps for "spider" trees: at most one vertex of degree
/// >= 3, legs are chains ending in degree-1 tips. Covers intervals, paths and
/// star-shaped clusters, which make up almost every cluster a tree partition
/// produces. Everything else falls back to the secular-matrix solver.
namespace analytic {

struct SpiderLegs {
    std::vector<double> length;
    std::vector<bool> dirichlet_tip;
};

/// Decomposes a tree into legs hanging off a center vertex. Fails (nullopt)
/// on graphs with more than one branching vertex, Dirichlet conditions away
/// from leg tips, or cycles.
inline std::optional<SpiderLegs> spider_decompose(const MetricGraph& g,
                                                  const std::set<VertexId>& dirichlet) {
    if (!g.connected() || g.betti_number() != 0) return std::nullopt;

    VertexId center;
    int branch_count = 0;
    for (const VertexId& v : g.vertices()) {
        if (g.degree(v) >= 3) {
            ++branch_count;
            center = v;
        }
    }
    if (branch_count > 1) return std::nullopt;
    if (branch_count == 0) {
        // a path: prefer a free endpoint, otherwise a free interior vertex
        for (const VertexId& v : g.vertices())
            if (g.degree(v) == 1 && !dirichlet.count(v)) {
                center = v;
                break;
            }
        if (center.empty()) {
            for (const VertexId& v : g.vertices())
                if (g.degree(v) == 2 && !dirichlet.count(v)) {
                    center = v;
                    break;
                }
        }
        if (center.empty()) return std::nullopt;
    }
    if (dirichlet.count(center)) return std::nullopt;

    SpiderLegs legs;
    for (const EdgeEnd& start : g.ends_at(center)) {
        double len = 0.0;
        EdgeEnd cur = start;
        VertexId at = center;
        while (true) {
            const Edge& e = g.edge(cur.edge);
            len += e.length;
            at = cur.at_source ? e.to : e.from;
            const int deg = g.degree(at);
            if (deg == 1) break;
            if (deg != 2 || at == center) return std::nullopt;
            if (dirichlet.count(at)) return std::nullopt; // Dirichlet mid-chain
            // continue through the other end at this vertex
            EdgeEnd next{};
            bool found = false;
            for (const EdgeEnd& cand : g.ends_at(at)) {
                const bool same_arrival =
                    cand.edge == cur.edge && cand.at_source != cur.at_source;
                if (same_arrival) continue;
                next = cand;
                found = true;
            }
            if (!found) return std::nullopt;
            cur = next;
        }
        legs.length.push_back(len);
        legs.dirichlet_tip.push_back(dirichlet.count(at) != 0);
    }
    return legs;
}

namespace detail {

/// Increasing-function bisection on (lo, hi), assuming f(lo) < 0 < f(hi).
inline double bisect_increasing(double lo, double hi, const auto& f) {
    double flo = f(lo);
    if (flo > 0.0) return lo;
    for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// First nontrivial standard eigenvalue of a spider: the smallest k with
/// sum_i tan(k l_i) = 0, or the smallest simultaneous pole of two legs
/// (center-vanishing mode), squared.
inline std::optional<double> spider_mu2(const MetricGraph& g) {
    auto legs_opt = spider_decompose(g, {});
    if (!legs_opt) return std::nullopt;
    const std::vector<double>& len = legs_opt->length;
    const double pi = std::numbers::pi;

    // smallest poles of each tan(k l_i): (2m+1) pi / (2 l_i)
    std::vector<double> poles;
    for (double l : len)
        for (int m = 0; m < 3; ++m) poles.push_back((2.0 * m + 1.0) * pi / (2.0 * l));
    std::sort(poles.begin(), poles.end());

    auto S = [&](double k) {
        double s = 0.0;
        for (double l : len) s += std::tan(k * l);
        return s;
    };

    // coincident poles give an eigenvalue directly
    if (poles.size() >= 2 && poles[1] - poles[0] < 1e-12 * poles[0]) {
        const double k = poles[0];
        return k * k;
    }
    if (poles.size() < 2) return std::nullopt;
    const double a = poles[0], b = poles[1];
    const double pad = 1e-13 * (b - a) + 1e-300;
    const double k = detail::bisect_increasing(a + pad, b - pad, S);
    return k * k;
}

/// First eigenvalue of a spider with Dirichlet conditions on a subset of leg
/// tips: smallest root of sum_N tan(k l_i) - sum_D cot(k l_i).
inline std::optional<double> spider_lambda1(const MetricGraph& g,
                                            const std::set<VertexId>& dirichlet) {
    if (dirichlet.empty()) return std::nullopt;
    // boundary vertices must be degree-1 tips
    for (const VertexId& v : dirichlet) {
        if (!g.has_vertex(v)) return std::nullopt;
        if (g.degree(v) != 1) return std::nullopt;
    }
    if (g.edges().size() == 1) {
        const Edge& e = g.edges()[0];
        const bool d_from = dirichlet.count(e.from) != 0;
        const bool d_to = dirichlet.count(e.to) != 0;
        if (d_from && d_to) {
            const double k = std::numbers::pi / e.length;
            return k * k;
        }
    }
    auto legs_opt = spider_decompose(g, dirichlet);
    if (!legs_opt) return std::nullopt;
    const SpiderLegs& legs = *legs_opt;
    const double pi = std::numbers::pi;

    bool any_d = false;
    double first_pole = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < legs.length.size(); ++i) {
        if (legs.dirichlet_tip[i]) {
            any_d = true;
            first_pole = std::min(first_pole, pi / legs.length[i]); // cot pole
        } else {
            first_pole = std::min(first_pole, pi / (2.0 * legs.length[i])); // tan pole
        }
    }
    if (!any_d) return std::nullopt;

    auto T = [&](double k) {
        double s = 0.0;
        for (std::size_t i = 0; i < legs.length.size(); ++i) {
            const double kl = k * legs.length[i];
            if (legs.dirichlet_tip[i]) s -= std::cos(kl) / std::sin(kl);
            else s += std::tan(kl);
        }
        return s;
    };
    const double k = detail::bisect_increasing(1e-12 * first_pole, first_pole * (1.0 - 1e-13), T);
    return k * k;
}

} // namespace analytic
} // namespace qgraph
