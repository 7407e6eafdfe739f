#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qgraph/dense.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/metric_graph.hpp"

namespace qgraph {

/// Vertex conditions: standard (Kirchhoff) everywhere except an optional set
/// of Dirichlet vertices.
struct BoundaryCondition {
    std::set<VertexId> dirichlet;

    static BoundaryCondition standard() { return {}; }

    /// Dirichlet conditions on the topological boundary (degree-1 vertices).
    static BoundaryCondition topological_boundary(const MetricGraph& g) {
        BoundaryCondition bc;
        for (const VertexId& v : g.vertices())
            if (g.degree(v) == 1) bc.dirichlet.insert(v);
        return bc;
    }

    void validate(const MetricGraph& g) const {
        for (const VertexId& v : dirichlet)
            if (!g.has_vertex(v)) throw ParseError("dirichlet set references unknown vertex '" + v + "'");
    }
};

/// Per-edge coefficients: f(x) = a cos(kx) + b sin(kx) for k > 0, and
/// f(x) = a + b x for k == 0.
struct EdgeCoeff {
    double a = 0.0;
    double b = 0.0;
};

/// An edgewise trigonometric function on a graph; coefficients are aligned
/// with the graph's sorted edge order.
struct Eigenfunction {
    double k = 0.0;
    std::vector<EdgeCoeff> coeff;

    double mu() const { return k * k; }
};

struct Eigenpair {
    double k = 0.0;
    double mu = 0.0;
    int multiplicity = 1;
    std::vector<Eigenfunction> basis; // L2-orthonormal, deterministic signs
};

/// (value, derivative in edge orientation) at a point. Works on any graph the
/// function's coefficient vector is aligned with.
inline std::pair<double, double> evaluate(const MetricGraph& g, const Eigenfunction& f,
                                          const GraphPoint& p) {
    if (!g.contains(p)) throw CutPointOffGraph("evaluation point off graph");
    const std::size_t ei = g.edge_index(p.edge);
    const EdgeCoeff c = f.coeff[ei];
    if (f.k == 0.0) return {c.a + c.b * p.x, c.b};
    const double s = std::sin(f.k * p.x), co = std::cos(f.k * p.x);
    return {c.a * co + c.b * s, f.k * (-c.a * s + c.b * co)};
}

inline double value_at_vertex(const MetricGraph& g, const Eigenfunction& f, const VertexId& v) {
    const auto ends = g.ends_at(v);
    const Edge& e = g.edge(ends.front().edge);
    return evaluate(g, f, {e.id, ends.front().at_source ? 0.0 : e.length}).first;
}

/// L2 inner product of two functions with the same wavenumber, by closed-form
/// trigonometric integrals.
inline double l2_inner(const MetricGraph& g, const Eigenfunction& f, const Eigenfunction& h) {
    double total = 0.0;
    const double k = f.k;
    for (std::size_t i = 0; i < g.edges().size(); ++i) {
        const double len = g.edges()[i].length;
        const EdgeCoeff x = f.coeff[i], y = h.coeff[i];
        if (k == 0.0) {
            total += x.a * y.a * len + (x.a * y.b + x.b * y.a) * len * len / 2.0 +
                     x.b * y.b * len * len * len / 3.0;
        } else {
            const double s2 = std::sin(2.0 * k * len);
            const double icc = len / 2.0 + s2 / (4.0 * k);
            const double iss = len / 2.0 - s2 / (4.0 * k);
            const double s1 = std::sin(k * len);
            const double isc = s1 * s1 / (2.0 * k);
            total += x.a * y.a * icc + (x.a * y.b + x.b * y.a) * isc + x.b * y.b * iss;
        }
    }
    return total;
}

inline double l2_norm(const MetricGraph& g, const Eigenfunction& f) {
    return std::sqrt(std::max(0.0, l2_inner(g, f, f)));
}

/// Secular matrix for mu = k^2, k > 0: one block of rows per vertex encoding
/// continuity + Kirchhoff (standard) or value = 0 per incident end
/// (Dirichlet). Derivative rows are scaled by 1/k. The nullspace corresponds
/// to the eigenspace.
inline Matrix secular_matrix(const MetricGraph& g, const BoundaryCondition& bc, double k) {
    bc.validate(g);
    const std::size_t ne = g.edges().size();
    Matrix m(2 * ne, 2 * ne);
    std::size_t row = 0;

    // value(end) and outgoing-derivative(end)/k as coefficient rows
    auto value_row = [&](const EdgeEnd& end, double sign, std::size_t r) {
        const std::size_t ei = g.edge_index(end.edge);
        const double len = g.edges()[ei].length;
        if (end.at_source) {
            m(r, 2 * ei) += sign;
        } else {
            m(r, 2 * ei) += sign * std::cos(k * len);
            m(r, 2 * ei + 1) += sign * std::sin(k * len);
        }
    };
    auto derivative_row = [&](const EdgeEnd& end, std::size_t r) {
        const std::size_t ei = g.edge_index(end.edge);
        const double len = g.edges()[ei].length;
        if (end.at_source) {
            m(r, 2 * ei + 1) += 1.0; // f'(0)/k = b
        } else {
            m(r, 2 * ei) += std::sin(k * len); // -f'(len)/k
            m(r, 2 * ei + 1) += -std::cos(k * len);
        }
    };

    for (const VertexId& v : g.vertices()) {
        const auto ends = g.ends_at(v);
        if (bc.dirichlet.count(v)) {
            for (const EdgeEnd& end : ends) value_row(end, 1.0, row++);
        } else {
            for (std::size_t i = 1; i < ends.size(); ++i) {
                value_row(ends[0], 1.0, row);
                value_row(ends[i], -1.0, row);
                ++row;
            }
            for (const EdgeEnd& end : ends) derivative_row(end, row);
            ++row;
        }
    }
    return m;
}

/// Residual of the vertex conditions for a coefficient vector, relative to
/// its Euclidean norm.
inline double vertex_condition_residual(const MetricGraph& g, const BoundaryCondition& bc,
                                        const Eigenfunction& f) {
    if (f.k == 0.0) {
        // constant / linear case checked directly
        double r = 0.0;
        for (const VertexId& v : g.vertices()) {
            const auto ends = g.ends_at(v);
            std::vector<double> vals;
            double dsum = 0.0;
            for (const EdgeEnd& end : ends) {
                const Edge& e = g.edge(end.edge);
                auto [val, der] = evaluate(g, f, {e.id, end.at_source ? 0.0 : e.length});
                vals.push_back(val);
                dsum += end.at_source ? der : -der;
            }
            if (bc.dirichlet.count(v)) {
                for (double val : vals) r = std::max(r, std::abs(val));
            } else {
                for (double val : vals) r = std::max(r, std::abs(val - vals.front()));
                r = std::max(r, std::abs(dsum));
            }
        }
        return r;
    }
    Matrix m = secular_matrix(g, bc, f.k);
    std::vector<double> c(2 * g.edges().size());
    double nrm = 0.0;
    for (std::size_t i = 0; i < f.coeff.size(); ++i) {
        c[2 * i] = f.coeff[i].a;
        c[2 * i + 1] = f.coeff[i].b;
        nrm += c[2 * i] * c[2 * i] + c[2 * i + 1] * c[2 * i + 1];
    }
    nrm = std::sqrt(nrm);
    double r = 0.0;
    for (double y : m.multiply(c)) r = std::max(r, std::abs(y));
    return nrm > 0.0 ? r / nrm : r;
}

struct SolverOptions {
    int oversample = 16;       // grid step pi / (oversample * total_length)
    double cap_factor = 4.0;   // k_cap = cap_factor * pi * (n_max + 1) / total_length
    double rank_tol = 1e-8;    // relative to sigma_max
    double cond_tol = 1e-8;    // vertex-condition residual bound
    double refine_rel = 1e-12; // bracket width relative to k
    double dedupe_rel = 1e-9;
};

namespace detail {

inline double golden_minimize(double a, double b, const auto& f, double rel_tol) {
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 300 && (b - a) > rel_tol * (std::abs(a) + std::abs(b)) * 0.5; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return (a + b) / 2.0;
}

/// Nullspace of the secular matrix at k, turned into an L2-orthonormal
/// eigenfunction basis with deterministic signs.
inline std::vector<Eigenfunction> nullspace_basis(const MetricGraph& g, const SvdResult& svd,
                                                  double k, int nullity) {
    const std::size_t n = svd.sigma.size();
    std::vector<Eigenfunction> basis;
    for (int j = 0; j < nullity; ++j) {
        Eigenfunction f;
        f.k = k;
        f.coeff.resize(g.edges().size());
        const std::size_t col = n - 1 - static_cast<std::size_t>(j);
        for (std::size_t e = 0; e < g.edges().size(); ++e) {
            f.coeff[e].a = svd.v(2 * e, col);
            f.coeff[e].b = svd.v(2 * e + 1, col);
        }
        basis.push_back(std::move(f));
    }
    // modified Gram-Schmidt in L2
    std::vector<Eigenfunction> ortho;
    for (Eigenfunction& f : basis) {
        for (const Eigenfunction& q : ortho) {
            const double proj = l2_inner(g, f, q);
            for (std::size_t e = 0; e < f.coeff.size(); ++e) {
                f.coeff[e].a -= proj * q.coeff[e].a;
                f.coeff[e].b -= proj * q.coeff[e].b;
            }
        }
        const double nrm = l2_norm(g, f);
        if (nrm < 1e-10) throw RankMismatch("nullspace basis degenerated during orthonormalization");
        for (EdgeCoeff& c : f.coeff) {
            c.a /= nrm;
            c.b /= nrm;
        }
        // sign convention: first coefficient of visible size is positive
        double scale = 0.0;
        for (const EdgeCoeff& c : f.coeff) scale = std::max({scale, std::abs(c.a), std::abs(c.b)});
        for (const EdgeCoeff& c : f.coeff) {
            double lead = 0.0;
            if (std::abs(c.a) > 1e-9 * scale) lead = c.a;
            else if (std::abs(c.b) > 1e-9 * scale) lead = c.b;
            if (lead != 0.0) {
                if (lead < 0.0)
                    for (EdgeCoeff& cc : f.coeff) {
                        cc.a = -cc.a;
                        cc.b = -cc.b;
                    }
                break;
            }
        }
        ortho.push_back(std::move(f));
    }
    return ortho;
}

inline Eigenpair constant_pair(const MetricGraph& g) {
    Eigenpair p;
    p.k = 0.0;
    p.mu = 0.0;
    p.multiplicity = 1;
    Eigenfunction f;
    f.k = 0.0;
    f.coeff.assign(g.edges().size(), {1.0 / std::sqrt(g.total_length()), 0.0});
    p.basis.push_back(std::move(f));
    return p;
}

/// Scans sigma_min(M(k)) for dips, refining each to an eigenvalue. Stops when
/// `n_target` eigenvalues (counted with multiplicity) are collected or the
/// wavenumber limit is reached.
inline std::vector<Eigenpair> scan_roots(const MetricGraph& g, const BoundaryCondition& bc,
                                         int n_target, double k_limit, bool throw_if_short,
                                         const SolverOptions& opts) {
    bc.validate(g);
    std::vector<Eigenpair> out;
    int count = 0;
    if (bc.dirichlet.empty()) {
        out.push_back(constant_pair(g));
        count = 1;
    }
    if (count >= n_target) return out;

    const double L = g.total_length();
    const double dk = std::numbers::pi / (opts.oversample * L);
    // below pi/(4L) no positive eigenvalue exists, but the secular matrix
    // degenerates as k -> 0; dips there are discarded
    const double k_floor = std::numbers::pi / (4.0 * L);

    auto sig = [&](double k) { return sigma_min(secular_matrix(g, bc, k)); };

    double s_prev = sig(dk), s_cur = sig(2.0 * dk);
    double last_accepted_k = -1.0;
    for (std::size_t i = 2;; ++i) {
        const double k_next = (static_cast<double>(i) + 1.0) * dk;
        if (k_next - 2.0 * dk > k_limit) break;
        const double s_next = sig(k_next);
        const double k_cur = static_cast<double>(i) * dk;
        if (s_cur < s_prev && s_cur <= s_next) {
            const double k_star =
                golden_minimize(k_cur - dk, k_cur + dk, sig, opts.refine_rel);
            SvdResult svd = svd_decompose(secular_matrix(g, bc, k_star), /*want_vectors=*/true);
            const double tol = opts.rank_tol * svd.sigma_max();
            int nullity = 0;
            for (double sv : svd.sigma)
                if (sv < tol) ++nullity;
            const bool dup = last_accepted_k > 0.0 &&
                             std::abs(k_star - last_accepted_k) <
                                 opts.dedupe_rel * std::max(1.0, k_star);
            if (nullity > 0 && k_star >= k_floor && k_star <= k_limit && !dup) {
                Eigenpair p;
                p.k = k_star;
                p.mu = k_star * k_star;
                p.multiplicity = nullity;
                p.basis = nullspace_basis(g, svd, k_star, nullity);
                out.push_back(std::move(p));
                last_accepted_k = k_star;
                count += nullity;
                if (count >= n_target) return out;
            }
        }
        s_prev = s_cur;
        s_cur = s_next;
    }
    if (throw_if_short)
        throw ScanExhausted("found " + std::to_string(count) + " eigenvalues of " +
                            std::to_string(n_target) + " before the wavenumber cap");
    return out;
}

} // namespace detail

/// First n_max eigenvalues, counted with multiplicity, ascending. The last
/// pair keeps its full multiplicity even when that overshoots n_max.
inline std::vector<Eigenpair> eigenvalues(const MetricGraph& g, const BoundaryCondition& bc,
                                          int n_max, const SolverOptions& opts = {}) {
    if (n_max < 1) throw ParseError("n_max must be >= 1");
    const double k_cap =
        opts.cap_factor * std::numbers::pi * (n_max + 1) / g.total_length();
    return detail::scan_roots(g, bc, n_max, k_cap, /*throw_if_short=*/true, opts);
}

/// All eigenvalues with wavenumber <= K.
inline std::vector<Eigenpair> eigenvalues_up_to(const MetricGraph& g, const BoundaryCondition& bc,
                                                double K, const SolverOptions& opts = {}) {
    return detail::scan_roots(g, bc, std::numeric_limits<int>::max(), K,
                              /*throw_if_short=*/false, opts);
}

/// Recomputes the orthonormal eigenfunction basis of a pair found by
/// `eigenvalues`.
inline std::vector<Eigenfunction> eigenfunction_basis(const MetricGraph& g,
                                                      const BoundaryCondition& bc,
                                                      const Eigenpair& pair,
                                                      const SolverOptions& opts = {}) {
    if (pair.k == 0.0) return detail::constant_pair(g).basis;
    SvdResult svd = svd_decompose(secular_matrix(g, bc, pair.k), /*want_vectors=*/true);
    const double tol = opts.rank_tol * svd.sigma_max();
    int nullity = 0;
    for (double sv : svd.sigma)
        if (sv < tol) ++nullity;
    if (nullity != pair.multiplicity)
        throw RankMismatch("nullity " + std::to_string(nullity) + " does not match multiplicity " +
                           std::to_string(pair.multiplicity));
    return detail::nullspace_basis(g, svd, pair.k, nullity);
}

/// Weyl-count sanity check: the number of wavenumbers <= K must stay within
/// 2(|E| + |V|) of total_length * K / pi.
struct CountCheckReport {
    double K = 0.0;
    int counted = 0;
    double weyl_estimate = 0.0;
    double allowed_deviation = 0.0;
    bool ok = false;
};

inline CountCheckReport eigenvalue_count_check(const MetricGraph& g, const BoundaryCondition& bc,
                                               double K, const SolverOptions& opts = {}) {
    if (!(K > 0.0)) throw ParseError("K must be positive");
    CountCheckReport rep;
    rep.K = K;
    for (const Eigenpair& p : eigenvalues_up_to(g, bc, K, opts)) rep.counted += p.multiplicity;
    rep.weyl_estimate = g.total_length() * K / std::numbers::pi;
    rep.allowed_deviation = 2.0 * (static_cast<double>(g.edges().size()) +
                                   static_cast<double>(g.vertices().size()));
    rep.ok = std::abs(rep.counted - rep.weyl_estimate) <= rep.allowed_deviation;
    return rep;
}

/// Smallest nontrivial standard eigenvalue (the spectral gap).
inline double mu_2(const MetricGraph& g, const SolverOptions& opts = {}) {
    return eigenvalues(g, BoundaryCondition::standard(), 2, opts).back().mu;
}

/// First eigenvalue with Dirichlet conditions on `dirichlet`.
inline double lambda_1(const MetricGraph& g, const std::set<VertexId>& dirichlet,
                       const SolverOptions& opts = {}) {
    if (dirichlet.empty()) return 0.0;
    BoundaryCondition bc{dirichlet};
    return eigenvalues(g, bc, 1, opts).front().mu;
}

} // namespace qgraph
