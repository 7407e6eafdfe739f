#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "qgraph/metric_graph.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph {

/// Points of interest of an eigenfunction: strictly interior edge points plus
/// whole vertices (each vertex reported once).
struct PointSet {
    std::vector<GraphPoint> interior;
    std::vector<VertexId> at_vertices;

    int count() const { return static_cast<int>(interior.size() + at_vertices.size()); }
};

namespace morse_detail {

constexpr double kSnapTol = 1e-9;   // distance below which a point sits at a vertex
constexpr double kZeroRel = 1e-9;   // relative |f| / |f'| thresholds
constexpr double kEdgeVanish = 1e-9; // relative amplitude below which an edge counts as f|_e == 0

inline double amplitude(const EdgeCoeff& c) { return std::hypot(c.a, c.b); }

inline double max_amplitude(const Eigenfunction& f) {
    double s = 0.0;
    for (const EdgeCoeff& c : f.coeff) s = std::max(s, amplitude(c));
    return s;
}

inline bool edge_vanishes(const Eigenfunction& f, std::size_t edge_idx, double scale) {
    return amplitude(f.coeff[edge_idx]) < kEdgeVanish * scale;
}

/// Lattice of points where R cos(kx - phase + offset) vanishes, i.e.
/// x = (phase + offset + j*pi) / k, restricted to [lo, hi].
inline std::vector<double> trig_lattice(double k, double phase, double offset, double lo,
                                        double hi) {
    std::vector<double> xs;
    const double pi = std::numbers::pi;
    const long j_lo = static_cast<long>(std::ceil((k * lo - phase - offset) / pi - 1e-12));
    const long j_hi = static_cast<long>(std::floor((k * hi - phase - offset) / pi + 1e-12));
    for (long j = j_lo; j <= j_hi; ++j) {
        const double x = (phase + offset + static_cast<double>(j) * pi) / k;
        if (x >= lo && x <= hi) xs.push_back(x);
    }
    return xs;
}

struct ZeroScan {
    PointSet points;                 // isolated zeros only
    std::vector<std::size_t> vanishing_edges;
    double scale = 0.0;
};

/// Collects the isolated zeros of f: closed-form lattice zeros on every edge
/// where f does not vanish identically. A lattice point within kSnapTol of an
/// edge end is reported as the vertex (once).
inline ZeroScan scan_zeros(const MetricGraph& g, const Eigenfunction& f) {
    ZeroScan out;
    out.scale = max_amplitude(f);
    std::set<VertexId> vertex_zeros;
    for (std::size_t ei = 0; ei < g.edges().size(); ++ei) {
        const Edge& e = g.edges()[ei];
        if (edge_vanishes(f, ei, out.scale)) {
            out.vanishing_edges.push_back(ei);
            continue;
        }
        const EdgeCoeff c = f.coeff[ei];
        const double phase = std::atan2(c.b, c.a);
        for (double x : trig_lattice(f.k, phase, std::numbers::pi / 2.0, -kSnapTol,
                                     e.length + kSnapTol)) {
            if (x <= kSnapTol) vertex_zeros.insert(e.from);
            else if (x >= e.length - kSnapTol) vertex_zeros.insert(e.to);
            else out.points.interior.push_back({e.id, x});
        }
    }
    out.points.at_vertices.assign(vertex_zeros.begin(), vertex_zeros.end());
    std::sort(out.points.interior.begin(), out.points.interior.end());
    return out;
}

/// Cuts at a point set: interior points become edge cuts, vertices become
/// full splits (skipped at degree one, where cutting changes nothing).
inline CutSet pointset_cuts(const MetricGraph& g, const PointSet& ps) {
    CutSet cuts;
    cuts.interior = ps.interior;
    for (const VertexId& v : ps.at_vertices) {
        const auto ends = g.ends_at(v);
        if (ends.size() < 2) continue;
        VertexSplit s{v, {}};
        for (const EdgeEnd& end : ends) s.groups.push_back({end});
        cuts.splits.push_back(std::move(s));
    }
    return cuts;
}

} // namespace morse_detail

/// Morse test: a nonconstant eigenfunction is Morse iff it vanishes
/// identically on no edge.
inline bool is_morse(const MetricGraph& g, const Eigenfunction& f) {
    if (f.k == 0.0) return false; // constant: every point degenerate
    return morse_detail::scan_zeros(g, f).vanishing_edges.empty();
}

/// Isolated zeros of any nonzero eigenfunction (edges where f vanishes
/// identically contribute no points; a vertex surrounded only by vanishing
/// edges is not isolated).
inline PointSet isolated_zeros(const MetricGraph& g, const Eigenfunction& f) {
    return morse_detail::scan_zeros(g, f).points;
}

/// Nodal points of a Morse eigenfunction.
inline PointSet nodal_points(const MetricGraph& g, const Eigenfunction& f) {
    auto scan = morse_detail::scan_zeros(g, f);
    if (f.k == 0.0 || !scan.vanishing_edges.empty())
        throw NotMorse("eigenfunction vanishes identically on an edge; zeros are not isolated");
    return scan.points;
}

/// Nodal point count phi(f) by isolated zeros; defined for any nonzero
/// eigenfunction.
inline int node_count(const MetricGraph& g, const Eigenfunction& f) {
    if (f.k == 0.0) return 0;
    return isolated_zeros(g, f).count();
}

/// Nodal domains of a Morse eigenfunction: components after cutting at every
/// nodal point.
inline std::pair<Partition, int> nodal_domains(const MetricGraph& g, const Eigenfunction& f) {
    const PointSet pts = nodal_points(g, f);
    Partition p = partition_by(g, morse_detail::pointset_cuts(g, pts));
    return {std::move(p), static_cast<int>(p.size())};
}

/// Neumann points: interior extrema plus vertices of degree >= 2 at which
/// every incident derivative vanishes. Degree-1 vertices are excluded by
/// definition.
inline PointSet neumann_points(const MetricGraph& g, const Eigenfunction& f) {
    using namespace morse_detail;
    auto scan = scan_zeros(g, f);
    if (f.k == 0.0 || !scan.vanishing_edges.empty())
        throw NotMorse("Neumann points require a Morse eigenfunction");

    PointSet out;
    const double dtol = kZeroRel * f.k * scan.scale;
    for (std::size_t ei = 0; ei < g.edges().size(); ++ei) {
        const Edge& e = g.edges()[ei];
        const EdgeCoeff c = f.coeff[ei];
        const double phase = std::atan2(c.b, c.a);
        for (double x : trig_lattice(f.k, phase, 0.0, kSnapTol, e.length - kSnapTol))
            out.interior.push_back({e.id, x});
    }
    for (const VertexId& v : g.vertices()) {
        const auto ends = g.ends_at(v);
        if (ends.size() < 2) continue;
        bool all_flat = true;
        for (const EdgeEnd& end : ends) {
            const Edge& e = g.edge(end.edge);
            const double x = end.at_source ? 0.0 : e.length;
            if (std::abs(evaluate(g, f, {e.id, x}).second) > dtol) {
                all_flat = false;
                break;
            }
        }
        if (all_flat) out.at_vertices.push_back(v);
    }
    std::sort(out.interior.begin(), out.interior.end());
    return out;
}

/// Neumann domains: components after cutting at every Neumann point.
inline Partition neumann_domains(const MetricGraph& g, const Eigenfunction& f) {
    const PointSet pts = neumann_points(g, f);
    return partition_by(g, morse_detail::pointset_cuts(g, pts));
}

struct Classification {
    bool is_morse = false;
    bool is_generic = false;
    std::vector<std::string> reasons; // failed genericity clauses
};

/// Morse / generic flags for one basis function of an eigenpair.
inline Classification classify(const MetricGraph& g, const Eigenpair& pair,
                               std::size_t basis_index = 0) {
    using namespace morse_detail;
    Classification cl;
    const Eigenfunction& f = pair.basis.at(basis_index);
    if (f.k == 0.0) {
        cl.is_morse = false;
        cl.reasons.push_back("constant eigenfunction");
        return cl;
    }
    auto scan = scan_zeros(g, f);
    cl.is_morse = scan.vanishing_edges.empty();
    if (!cl.is_morse) {
        for (std::size_t ei : scan.vanishing_edges)
            cl.reasons.push_back("vanishes identically on edge '" + g.edges()[ei].id + "'");
    }
    if (pair.multiplicity != 1)
        cl.reasons.push_back("eigenvalue has multiplicity " + std::to_string(pair.multiplicity));
    for (const VertexId& v : scan.points.at_vertices)
        cl.reasons.push_back("vanishes at vertex '" + v + "'");

    const double dtol = kZeroRel * f.k * scan.scale;
    for (const VertexId& v : g.vertices()) {
        const auto ends = g.ends_at(v);
        if (ends.size() < 2) continue;
        bool all_flat = true;
        for (const EdgeEnd& end : ends) {
            const Edge& e = g.edge(end.edge);
            const double x = end.at_source ? 0.0 : e.length;
            if (std::abs(evaluate(g, f, {e.id, x}).second) > dtol) {
                all_flat = false;
                break;
            }
        }
        if (all_flat) cl.reasons.push_back("extremal point at interior vertex '" + v + "'");
    }
    cl.is_generic = cl.is_morse && cl.reasons.empty();
    return cl;
}

namespace morse_detail {

inline Eigenfunction combine(const std::vector<Eigenfunction>& basis, std::size_t i,
                             std::size_t j, double theta) {
    Eigenfunction f;
    f.k = basis[i].k;
    f.coeff.resize(basis[i].coeff.size());
    const double c = std::cos(theta), s = std::sin(theta);
    for (std::size_t e = 0; e < f.coeff.size(); ++e) {
        f.coeff[e].a = c * basis[i].coeff[e].a + s * basis[j].coeff[e].a;
        f.coeff[e].b = c * basis[i].coeff[e].b + s * basis[j].coeff[e].b;
    }
    return f;
}

/// min over edges of the relative per-edge amplitude; zero when some edge
/// carries no part of the combination.
inline double support_score(const Eigenfunction& f) {
    double lo = std::numeric_limits<double>::max(), hi = 0.0;
    for (const EdgeCoeff& c : f.coeff) {
        const double r = amplitude(c);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return hi > 0.0 ? lo / hi : 0.0;
}

inline void fix_sign(Eigenfunction& f) {
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
            return;
        }
    }
}

inline void l2_normalize(const MetricGraph& g, Eigenfunction& f) {
    const double nrm = l2_norm(g, f);
    if (nrm > 0.0)
        for (EdgeCoeff& c : f.coeff) {
            c.a /= nrm;
            c.b /= nrm;
        }
}

} // namespace morse_detail

/// One representative of a degenerate eigenspace, with its isolated-zero
/// count.
struct Representative {
    Eigenfunction fn;
    bool morse = false;
    int phi = 0;
    double theta = 0.0; // angle in the (i, j) basis plane it was found at
};

/// A fully supported (Morse) member of the eigenspace, searched over a
/// 360-point angle grid in each basis plane and refined.
inline std::optional<Eigenfunction> morse_representative(const MetricGraph& g,
                                                         const Eigenpair& pair) {
    using namespace morse_detail;
    if (pair.multiplicity == 1) {
        if (is_morse(g, pair.basis[0])) return pair.basis[0];
        return std::nullopt;
    }
    const double pi = std::numbers::pi;
    const int grid = 360;
    double best_score = -1.0;
    Eigenfunction best;
    for (std::size_t i = 0; i < pair.basis.size(); ++i) {
        for (std::size_t j = i + 1; j < pair.basis.size(); ++j) {
            double best_theta = 0.0, best_here = -1.0;
            for (int t = 0; t < grid; ++t) {
                const double theta = pi * t / grid;
                const double sc = support_score(combine(pair.basis, i, j, theta));
                if (sc > best_here) {
                    best_here = sc;
                    best_theta = theta;
                }
            }
            const double step = pi / grid;
            const double refined = detail::golden_minimize(
                best_theta - step, best_theta + step,
                [&](double th) { return -support_score(combine(pair.basis, i, j, th)); }, 1e-12);
            Eigenfunction cand = combine(pair.basis, i, j, refined);
            const double sc = support_score(cand);
            if (sc > best_score) {
                best_score = sc;
                best = std::move(cand);
            }
        }
    }
    if (best_score < kEdgeVanish) return std::nullopt;
    l2_normalize(g, best);
    fix_sign(best);
    if (!is_morse(g, best)) return std::nullopt;
    return best;
}

/// Distinguished representatives of an eigenspace, one per spectral index in
/// the block, ordered by ascending isolated-zero count. For a degenerate
/// space these are the directions vanishing on some edge (found by an angle
/// scan) followed by a fully supported Morse member.
inline std::vector<Representative> eigenspace_representatives(const MetricGraph& g,
                                                              const Eigenpair& pair) {
    using namespace morse_detail;
    std::vector<Representative> reps;
    if (pair.multiplicity == 1 || pair.k == 0.0) {
        const Eigenfunction& f = pair.basis[0];
        reps.push_back({f, is_morse(g, f), node_count(g, f), 0.0});
        return reps;
    }

    const double pi = std::numbers::pi;
    const int grid = 360;
    std::vector<Representative> candidates;
    for (std::size_t i = 0; i < pair.basis.size(); ++i) {
        for (std::size_t j = i + 1; j < pair.basis.size(); ++j) {
            std::vector<double> scores(grid);
            for (int t = 0; t < grid; ++t)
                scores[static_cast<std::size_t>(t)] =
                    support_score(combine(pair.basis, i, j, pi * t / grid));
            std::vector<double> found_angles;
            for (int t = 0; t < grid; ++t) {
                const double prev = scores[static_cast<std::size_t>((t + grid - 1) % grid)];
                const double next = scores[static_cast<std::size_t>((t + 1) % grid)];
                const double cur = scores[static_cast<std::size_t>(t)];
                if (cur <= prev && cur <= next && cur < 0.05) {
                    const double step = pi / grid;
                    const double theta0 = pi * t / grid;
                    const double refined = detail::golden_minimize(
                        theta0 - step, theta0 + step,
                        [&](double th) { return support_score(combine(pair.basis, i, j, th)); },
                        1e-13);
                    Eigenfunction cand = combine(pair.basis, i, j, refined);
                    if (support_score(cand) < 1e-7) {
                        bool dup = false;
                        for (double a : found_angles) {
                            double d = std::abs(refined - a);
                            d = std::min(d, std::abs(d - pi));
                            if (d < 1e-4) dup = true;
                        }
                        if (!dup) {
                            found_angles.push_back(refined);
                            l2_normalize(g, cand);
                            fix_sign(cand);
                            candidates.push_back(
                                {cand, false, node_count(g, cand), refined});
                        }
                    }
                }
            }
        }
    }
    if (auto mrep = morse_representative(g, pair))
        candidates.push_back({*mrep, true, node_count(g, *mrep), -1.0});

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Representative& a, const Representative& b) {
                         if (a.phi != b.phi) return a.phi < b.phi;
                         if (a.morse != b.morse) return !a.morse;
                         return a.theta < b.theta;
                     });
    for (const Representative& c : candidates) {
        if (static_cast<int>(reps.size()) >= pair.multiplicity) break;
        reps.push_back(c);
    }
    std::size_t bi = 0;
    while (static_cast<int>(reps.size()) < pair.multiplicity && bi < pair.basis.size()) {
        const Eigenfunction& f = pair.basis[bi++];
        reps.push_back({f, is_morse(g, f), node_count(g, f), 0.0});
    }
    return reps;
}

/// Nodal domain count for possibly non-Morse functions: components of the
/// graph minus the nodal set (edges where f vanishes identically belong to
/// the nodal set and are removed outright).
inline int nodal_domain_count_general(const MetricGraph& g, const Eigenfunction& f) {
    using namespace morse_detail;
    if (f.k == 0.0) return 1;
    auto scan = scan_zeros(g, f);
    if (scan.vanishing_edges.empty()) {
        Partition p = partition_by(g, pointset_cuts(g, scan.points));
        return static_cast<int>(p.size());
    }
    std::set<EdgeId> dropped;
    for (std::size_t ei : scan.vanishing_edges) dropped.insert(g.edges()[ei].id);
    std::vector<Edge> kept;
    std::set<VertexId> vset;
    for (const Edge& e : g.edges()) {
        if (dropped.count(e.id)) continue;
        kept.push_back(e);
        vset.insert(e.from);
        vset.insert(e.to);
    }
    MetricGraph sub = MetricGraph::build_unchecked(
        std::vector<VertexId>(vset.begin(), vset.end()), std::move(kept));
    CutSet cuts;
    cuts.interior = scan.points.interior;
    for (const VertexId& v : scan.points.at_vertices) {
        if (!sub.has_vertex(v)) continue;
        const auto ends = sub.ends_at(v);
        if (ends.size() < 2) continue;
        VertexSplit s{v, {}};
        for (const EdgeEnd& end : ends) s.groups.push_back({end});
        cuts.splits.push_back(std::move(s));
    }
    CutGraph cg = apply_cut(sub, cuts);
    const auto labels = cg.graph.component_labels();
    std::set<int> with_edges;
    for (const Edge& e : cg.graph.edges())
        with_edges.insert(labels[cg.graph.vertex_index(e.from)]);
    return static_cast<int>(with_edges.size());
}

/// Glues per-cluster eigenfunctions of a tree partition into a global
/// eigenfunction whose Neumann domains are the clusters. Each cluster
/// function must be a generic mu_2 eigenfunction for the shared eigenvalue.
inline Eigenfunction glue_equipartition(const MetricGraph& parent, const Partition& p,
                                        const std::vector<Eigenfunction>& cluster_fns,
                                        double mu) {
    using namespace morse_detail;
    if (!parent.is_tree()) throw NotMorse("gluing requires a tree parent graph");
    if (cluster_fns.size() != p.clusters.size())
        throw NotEquipartition("one eigenfunction per cluster required");
    const double k = std::sqrt(mu);
    for (std::size_t i = 0; i < p.clusters.size(); ++i) {
        const double mui = cluster_fns[i].mu();
        if (std::abs(mui - mu) > 1e-8 * std::max(1.0, std::abs(mu)))
            throw NotEquipartition("cluster " + std::to_string(i) +
                                   " eigenvalue differs from the shared eigenvalue");
        Eigenpair pr;
        pr.k = cluster_fns[i].k;
        pr.mu = mui;
        pr.multiplicity = 1;
        pr.basis = {cluster_fns[i]};
        Classification cl = classify(p.clusters[i].graph, pr, 0);
        if (!cl.is_morse || !cl.is_generic)
            throw NotGenericMinimizer("cluster " + std::to_string(i) +
                                      " eigenfunction is not generic");
    }

    // adjacency of clusters through shared cut points
    std::map<std::string, std::vector<std::pair<std::size_t, VertexId>>> meet;
    for (std::size_t i = 0; i < p.clusters.size(); ++i)
        for (const VertexId& v : p.clusters[i].boundary)
            meet[p.clusters[i].boundary_origin.at(v)].push_back({i, v});

    std::vector<double> scale(p.clusters.size(), 0.0);
    scale[0] = 1.0;
    std::queue<std::size_t> work;
    work.push(0);
    while (!work.empty()) {
        const std::size_t i = work.front();
        work.pop();
        for (const VertexId& v : p.clusters[i].boundary) {
            const auto& peers = meet.at(p.clusters[i].boundary_origin.at(v));
            const double vi = value_at_vertex(p.clusters[i].graph, cluster_fns[i], v);
            for (const auto& [j, vj] : peers) {
                if (j == i || scale[j] != 0.0) continue;
                const double fj = value_at_vertex(p.clusters[j].graph, cluster_fns[j], vj);
                const double scale_here = max_amplitude(cluster_fns[j]);
                if (std::abs(fj) < 1e-12 * scale_here)
                    throw ZeroAtInterface("cluster eigenfunction vanishes at shared point");
                scale[j] = scale[i] * vi / fj;
                work.push(j);
            }
        }
    }
    for (double s : scale)
        if (s == 0.0) throw NotEquipartition("cluster adjacency does not connect the partition");

    // compose parent-edge coefficients; overlapping segments must agree
    Eigenfunction glued;
    glued.k = k;
    glued.coeff.assign(parent.edges().size(), {0.0, 0.0});
    std::vector<bool> done(parent.edges().size(), false);
    double max_scale = 0.0;
    for (std::size_t i = 0; i < p.clusters.size(); ++i)
        max_scale = std::max(max_scale, std::abs(scale[i]) * max_amplitude(cluster_fns[i]));
    for (std::size_t i = 0; i < p.clusters.size(); ++i) {
        const Cluster& cl = p.clusters[i];
        for (std::size_t ce = 0; ce < cl.graph.edges().size(); ++ce) {
            const Edge& seg_edge = cl.graph.edges()[ce];
            const EdgeSegment seg = cl.segment.at(seg_edge.id);
            const std::size_t pi_idx = parent.edge_index(seg.parent);
            const EdgeCoeff c = cluster_fns[i].coeff[ce];
            // shift from segment coordinate t = x - a to parent coordinate x
            const double ca = std::cos(k * seg.a), sa = std::sin(k * seg.a);
            EdgeCoeff pc;
            pc.a = scale[i] * (c.a * ca - c.b * sa);
            pc.b = scale[i] * (c.a * sa + c.b * ca);
            if (!done[pi_idx]) {
                glued.coeff[pi_idx] = pc;
                done[pi_idx] = true;
            } else {
                const double mism = std::hypot(glued.coeff[pi_idx].a - pc.a,
                                               glued.coeff[pi_idx].b - pc.b);
                if (mism > 1e-7 * std::max(1.0, max_scale))
                    throw NotEquipartition("glued segments disagree on edge '" + seg.parent + "'");
            }
        }
    }
    const double res = vertex_condition_residual(parent, BoundaryCondition::standard(), glued);
    if (res > 1e-8)
        throw NotEquipartition("glued function violates vertex conditions (residual " +
                               std::to_string(res) + ")");
    l2_normalize(parent, glued);
    fix_sign(glued);
    return glued;
}

/// Full analysis of one eigenfunction, as exposed by the report commands.
struct DomainReport {
    PointSet nodal;
    int phi = 0; // nodal point count
    int z = 0;   // nodal domain count
    std::optional<Partition> nodal_partition;
    PointSet neumann;
    int neumann_domain_count = 0;
    std::optional<Partition> neumann_partition;
    bool is_morse = false;
    bool is_generic = false;
    bool degenerate_constant = false; // mu_1 = 0: every point extremal
    std::vector<std::string> reasons;
};

inline DomainReport domain_report(const MetricGraph& g, const Eigenpair& pair,
                                  const Eigenfunction& f) {
    DomainReport rep;
    Eigenpair probe = pair;
    probe.basis = {f};
    Classification cl = classify(g, probe, 0);
    rep.is_morse = cl.is_morse;
    rep.is_generic = cl.is_generic && pair.multiplicity == 1;
    rep.reasons = cl.reasons;
    if (f.k == 0.0) {
        rep.degenerate_constant = true;
        rep.z = 1;
        return rep;
    }
    rep.nodal = isolated_zeros(g, f);
    rep.phi = rep.nodal.count();
    if (rep.is_morse) {
        auto [np, z] = nodal_domains(g, f);
        rep.nodal_partition = std::move(np);
        rep.z = z;
        Partition nd = neumann_domains(g, f);
        rep.neumann = neumann_points(g, f);
        rep.neumann_domain_count = static_cast<int>(nd.size());
        rep.neumann_partition = std::move(nd);
    } else {
        rep.z = nodal_domain_count_general(g, f);
    }
    return rep;
}

} // namespace qgraph
