#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "qgraph/analytic.hpp"
#include "qgraph/metric_graph.hpp"
#include "qgraph/rng.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph {

enum class EnergyKind { neumann, dirichlet };

inline const char* energy_kind_name(EnergyKind k) {
    return k == EnergyKind::neumann ? "neumann" : "dirichlet";
}

/// Energy of a partition: per-cluster spectral values and their maximum.
struct PartitionEnergy {
    EnergyKind kind = EnergyKind::neumann;
    std::vector<double> values;
    double energy = 0.0;
    bool equipartition = false;
};

namespace part_detail {

constexpr double kEquipartitionRel = 1e-6;

inline std::string double_bits(double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(u));
    return buf;
}

inline std::string cluster_key(const Cluster& c, EnergyKind kind) {
    std::string key;
    for (const VertexId& v : c.graph.vertices()) {
        key += v;
        key += ';';
    }
    key += '|';
    for (const Edge& e : c.graph.edges()) {
        key += e.id;
        key += ',';
        key += e.from;
        key += ',';
        key += e.to;
        key += ',';
        key += double_bits(e.length);
        key += ';';
    }
    if (kind == EnergyKind::dirichlet) {
        key += '|';
        for (const VertexId& v : c.boundary) {
            key += v;
            key += ';';
        }
    }
    return key;
}

inline bool is_equipartition(const std::vector<double>& values) {
    if (values.empty()) return false;
    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());
    return hi - lo <= kEquipartitionRel * std::max(std::abs(hi), 1e-300);
}

/// Computes cluster energies, optionally through the closed-form spider
/// secular equations, memoizing on exact geometry. The solver route is always
/// available as the reference path.
class EnergyEvaluator {
public:
    EnergyEvaluator(EnergyKind kind, bool fast, bool allow_empty_boundary,
                    SolverOptions solver = {})
        : kind_(kind), fast_(fast), allow_empty_(allow_empty_boundary), solver_(solver) {}

    double cluster_value(const Cluster& c) {
        const std::string key = cluster_key(c, kind_);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        ++evaluations_;
        double value;
        if (kind_ == EnergyKind::neumann) {
            std::optional<double> fast;
            if (fast_) fast = analytic::spider_mu2(c.graph);
            value = fast ? *fast : mu_2(c.graph, solver_);
        } else {
            if (c.boundary.empty()) {
                if (!allow_empty_) throw EmptyBoundary("cluster has no boundary point");
                value = 0.0;
            } else {
                std::set<VertexId> d(c.boundary.begin(), c.boundary.end());
                std::optional<double> fast;
                if (fast_) fast = analytic::spider_lambda1(c.graph, d);
                value = fast ? *fast : lambda_1(c.graph, d, solver_);
            }
        }
        memo_.emplace(key, value);
        return value;
    }

    PartitionEnergy partition_energy(const Partition& p) {
        PartitionEnergy pe;
        pe.kind = kind_;
        for (const Cluster& c : p.clusters) pe.values.push_back(cluster_value(c));
        pe.energy = *std::max_element(pe.values.begin(), pe.values.end());
        pe.equipartition = is_equipartition(pe.values);
        return pe;
    }

    long evaluations() const { return evaluations_; }

private:
    EnergyKind kind_;
    bool fast_;
    bool allow_empty_;
    SolverOptions solver_;
    std::unordered_map<std::string, double> memo_;
    long evaluations_ = 0;
};

} // namespace part_detail

/// Neumann partition energy: max over clusters of mu_2, via the spectral
/// solver.
inline PartitionEnergy lambda_neumann(const Partition& p, const SolverOptions& opts = {}) {
    part_detail::EnergyEvaluator ev(EnergyKind::neumann, /*fast=*/false,
                                    /*allow_empty=*/true, opts);
    return ev.partition_energy(p);
}

/// Dirichlet partition energy: max over clusters of lambda_1 with the
/// cluster's boundary points as Dirichlet set. Every cluster must have one.
inline PartitionEnergy lambda_dirichlet(const Partition& p, const SolverOptions& opts = {}) {
    part_detail::EnergyEvaluator ev(EnergyKind::dirichlet, /*fast=*/false,
                                    /*allow_empty=*/false, opts);
    return ev.partition_energy(p);
}

struct MinPartOptions {
    int multistarts = 5;
    long class_budget = 100000;
    std::uint64_t seed = 0x51ce5afaull;
    bool fast_probes = true;     // spider closed forms for inner probes
    double min_rel_coord = 1e-9; // clamp for relative cut coordinates
    SolverOptions solver;
};

/// One combinatorial class: how many interior cuts each edge carries plus
/// which binary vertex splits are applied.
struct CutClass {
    std::vector<int> cuts_per_edge;
    std::vector<VertexSplit> splits;
    std::string signature;
};

struct MinimalPartitionResult {
    int k = 0;
    EnergyKind kind = EnergyKind::neumann;
    double energy = 0.0;
    CutSet cuts;
    Partition partition;
    PartitionEnergy certificate;
    std::string best_class;
    long classes_examined = 0;
    long evaluations = 0;
};

namespace part_detail {

inline std::string class_signature(const MetricGraph& g, const CutClass& cc) {
    std::string s;
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        if (cc.cuts_per_edge[e] == 0) continue;
        s += g.edges()[e].id + ":" + std::to_string(cc.cuts_per_edge[e]) + "|";
    }
    for (const VertexSplit& vs : cc.splits) {
        s += vs.vertex + "{";
        for (const auto& grp : vs.groups) {
            for (const EdgeEnd& end : grp) s += end.edge + (end.at_source ? "s" : "t");
            s += "/";
        }
        s += "}|";
    }
    return s.empty() ? "trivial" : s;
}

/// All binary groupings of the incident ends of a vertex (unordered pairs of
/// nonempty groups).
inline std::vector<VertexSplit> binary_splits(const MetricGraph& g, const VertexId& v) {
    const auto ends = g.ends_at(v);
    std::vector<VertexSplit> out;
    const std::size_t d = ends.size();
    if (d < 3) return out;
    for (std::uint32_t mask = 1; mask < (1u << (d - 1)); ++mask) {
        VertexSplit s{v, {{ends[0]}, {}}};
        for (std::size_t i = 1; i < d; ++i) {
            if (mask & (1u << (i - 1))) s.groups[0].push_back(ends[i]);
            else s.groups[1].push_back(ends[i]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline CutSet class_cutset(const MetricGraph& g, const CutClass& cc,
                           const std::vector<double>& rel_pos) {
    CutSet cuts;
    cuts.splits = cc.splits;
    std::size_t slot = 0;
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        const int c = cc.cuts_per_edge[e];
        if (c == 0) continue;
        std::vector<double> rs(rel_pos.begin() + static_cast<long>(slot),
                               rel_pos.begin() + static_cast<long>(slot + c));
        slot += static_cast<std::size_t>(c);
        std::sort(rs.begin(), rs.end());
        const double len = g.edges()[e].length;
        for (double r : rs) cuts.interior.push_back({g.edges()[e].id, r * len});
    }
    return cuts;
}

inline std::vector<double> canonical_positions(const CutClass& cc) {
    std::vector<double> pos;
    for (int c : cc.cuts_per_edge)
        for (int j = 1; j <= c; ++j) pos.push_back(static_cast<double>(j) / (c + 1));
    return pos;
}

/// Enumerates combinatorial classes producing exactly k clusters: every
/// distribution of `extra` interior cuts over edges combined with subsets of
/// at most one binary split per branching vertex, with the total number of
/// cut events between k-1 and k-1+beta.
inline std::vector<CutClass> enumerate_classes(const MetricGraph& g, int k,
                                               long class_budget) {
    const int beta = g.betti_number();
    const std::size_t ne = g.edges().size();
    std::vector<std::vector<VertexSplit>> split_options;
    for (const VertexId& v : g.vertices()) {
        auto opts = binary_splits(g, v);
        if (!opts.empty()) split_options.push_back(std::move(opts));
    }

    std::vector<CutClass> classes;
    long enumerated = 0;

    // choose split subset, then compositions of the remaining cut count
    std::vector<int> chosen(split_options.size(), -1); // -1: no split at that vertex
    std::function<void(std::size_t, int)> choose_splits;

    std::vector<int> cuts(ne, 0);
    std::function<void(std::size_t, int, int)> compose = [&](std::size_t e, int remaining,
                                                             int splits_used) {
        if (e + 1 == ne || ne == 0) {
            if (ne > 0) cuts[e] = remaining;
            CutClass cc;
            cc.cuts_per_edge = cuts;
            for (std::size_t si = 0; si < chosen.size(); ++si)
                if (chosen[si] >= 0)
                    cc.splits.push_back(split_options[si][static_cast<std::size_t>(chosen[si])]);
            if (++enumerated > class_budget)
                throw BudgetExceeded("combinatorial classes exceed the search budget");
            // keep the class only if it yields exactly k clusters
            try {
                Partition p = partition_by(g, class_cutset(g, cc, canonical_positions(cc)));
                if (static_cast<int>(p.size()) == k) {
                    cc.signature = class_signature(g, cc);
                    classes.push_back(std::move(cc));
                }
            } catch (const Error&) {
                // degenerate class (e.g. split at a vertex a cut removed); skip
            }
            return;
        }
        for (int c = 0; c <= remaining; ++c) {
            cuts[e] = c;
            compose(e + 1, remaining - c, splits_used);
            cuts[e] = 0;
        }
    };

    choose_splits = [&](std::size_t vi, int splits_used) {
        if (vi == split_options.size()) {
            const int t_hi = k - 1 + beta - splits_used;
            if (t_hi < 0) return;
            const int t_lo = std::max(0, k - 1 - splits_used);
            for (int t = t_lo; t <= t_hi; ++t) compose(0, t, splits_used);
            return;
        }
        chosen[vi] = -1;
        choose_splits(vi + 1, splits_used);
        for (std::size_t oi = 0; oi < split_options[vi].size(); ++oi) {
            chosen[vi] = static_cast<int>(oi);
            choose_splits(vi + 1, splits_used + 1);
        }
        chosen[vi] = -1;
    };

    choose_splits(0, 0);
    std::sort(classes.begin(), classes.end(),
              [](const CutClass& a, const CutClass& b) { return a.signature < b.signature; });
    return classes;
}

struct ClassResult {
    double energy = std::numeric_limits<double>::infinity();
    std::vector<double> positions;
};

/// Compass (pattern) search over relative cut coordinates. Initial step 1/4
/// of the edge, halving on failure, stopping when the absolute step falls
/// below 1e-7 * min edge length.
inline ClassResult optimize_class(const MetricGraph& g, const CutClass& cc, int k,
                                  EnergyEvaluator& ev, const MinPartOptions& opts) {
    std::vector<std::size_t> dim_edge; // edge index per coordinate
    for (std::size_t e = 0; e < g.edges().size(); ++e)
        for (int j = 0; j < cc.cuts_per_edge[e]; ++j) dim_edge.push_back(e);
    const std::size_t dims = dim_edge.size();
    const double lmin = g.min_edge_length();
    const double eps = opts.min_rel_coord;

    auto objective = [&](const std::vector<double>& pos) -> double {
        // reject coincident cuts on the same edge
        std::size_t slot = 0;
        for (std::size_t e = 0; e < g.edges().size(); ++e) {
            const int c = cc.cuts_per_edge[e];
            if (c == 0) continue;
            std::vector<double> rs(pos.begin() + static_cast<long>(slot),
                                   pos.begin() + static_cast<long>(slot + c));
            slot += static_cast<std::size_t>(c);
            std::sort(rs.begin(), rs.end());
            for (std::size_t i = 0; i + 1 < rs.size(); ++i)
                if (rs[i + 1] - rs[i] < 1e-12)
                    return std::numeric_limits<double>::infinity();
        }
        Partition p = partition_by(g, class_cutset(g, cc, pos));
        if (static_cast<int>(p.size()) != k) return std::numeric_limits<double>::infinity();
        double worst = 0.0;
        for (const Cluster& c : p.clusters) worst = std::max(worst, ev.cluster_value(c));
        return worst;
    };

    ClassResult best;
    if (dims == 0) {
        best.energy = objective({});
        return best;
    }

    std::uint64_t class_hash = std::hash<std::string>{}(cc.signature);
    for (int start = 0; start < opts.multistarts; ++start) {
        std::vector<double> x;
        if (start == 0) {
            x = canonical_positions(cc);
        } else {
            Lcg64 rng(opts.seed ^ class_hash ^
                      (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(start + 1)));
            for (std::size_t e = 0; e < g.edges().size(); ++e) {
                const int c = cc.cuts_per_edge[e];
                for (int j = 1; j <= c; ++j) {
                    const double jitter = rng.uniform(-0.45, 0.45);
                    x.push_back(std::clamp((j + jitter) / (c + 1), eps, 1.0 - eps));
                }
            }
        }
        double fx = objective(x);
        double h = 0.25;
        double lmax = 0.0;
        for (std::size_t d = 0; d < dims; ++d)
            lmax = std::max(lmax, g.edges()[dim_edge[d]].length);
        while (h * lmax >= 1e-7 * lmin) {
            bool improved = false;
            for (std::size_t d = 0; d < dims && !improved; ++d) {
                for (double sgn : {+1.0, -1.0}) {
                    std::vector<double> y = x;
                    y[d] = std::clamp(y[d] + sgn * h, eps, 1.0 - eps);
                    if (y[d] == x[d]) continue;
                    const double fy = objective(y);
                    if (fy < fx) {
                        x = std::move(y);
                        fx = fy;
                        improved = true;
                        break;
                    }
                }
            }
            if (!improved) h *= 0.5;
        }
        if (fx < best.energy) {
            best.energy = fx;
            best.positions = x;
        }
    }
    return best;
}

inline MinimalPartitionResult run_minimal_partition(const MetricGraph& g, int k,
                                                    EnergyKind kind,
                                                    const MinPartOptions& opts) {
    if (k < 1) throw InfeasibleK("k must be >= 1");
    std::vector<CutClass> classes = enumerate_classes(g, k, opts.class_budget);
    if (classes.empty()) throw InfeasibleK("no cut class yields " + std::to_string(k) + " clusters");

    EnergyEvaluator ev(kind, opts.fast_probes, /*allow_empty=*/k == 1, opts.solver);

    double best_energy = std::numeric_limits<double>::infinity();
    std::string best_sig;
    const CutClass* best_class = nullptr;
    std::vector<double> best_pos;
    for (const CutClass& cc : classes) {
        ClassResult r = optimize_class(g, cc, k, ev, opts);
        if (r.energy < best_energy ||
            (r.energy == best_energy && cc.signature < best_sig)) {
            best_energy = r.energy;
            best_sig = cc.signature;
            best_class = &cc;
            best_pos = r.positions;
        }
    }
    if (!best_class || !std::isfinite(best_energy))
        throw InfeasibleK("optimizer found no feasible partition");

    MinimalPartitionResult res;
    res.k = k;
    res.kind = kind;
    res.cuts = class_cutset(g, *best_class, best_pos);
    res.partition = partition_by(g, res.cuts);
    // certificate through the plain solver route
    EnergyEvaluator cert(kind, /*fast=*/false, /*allow_empty=*/k == 1, opts.solver);
    res.certificate = cert.partition_energy(res.partition);
    res.energy = res.certificate.energy;
    res.best_class = best_sig;
    res.classes_examined = static_cast<long>(classes.size());
    res.evaluations = ev.evaluations();
    return res;
}

} // namespace part_detail

/// Spectral minimal k-partition on a tree: outer enumeration of combinatorial
/// classes, inner compass search over cut positions.
inline MinimalPartitionResult minimal_partition(const MetricGraph& g, int k, EnergyKind kind,
                                                const MinPartOptions& opts = {}) {
    if (!g.is_tree())
        throw InfeasibleK("minimal_partition requires a tree; use minimal_partition_general");
    return part_detail::run_minimal_partition(g, k, kind, opts);
}

/// Spectral minimal k-partition on a graph with cycles: cycle-breaking cuts
/// become additional continuous variables, jointly optimized.
inline MinimalPartitionResult minimal_partition_general(const MetricGraph& g, int k,
                                                        EnergyKind kind,
                                                        const MinPartOptions& opts = {}) {
    const int beta = g.betti_number();
    if (beta > 2) throw BudgetExceeded("first Betti number above 2 is out of scope");
    return part_detail::run_minimal_partition(g, k, kind, opts);
}

/// Picks the right optimizer for the graph.
inline MinimalPartitionResult minimal_partition_auto(const MetricGraph& g, int k,
                                                     EnergyKind kind,
                                                     const MinPartOptions& opts = {}) {
    return g.is_tree() ? minimal_partition(g, k, kind, opts)
                       : minimal_partition_general(g, k, kind, opts);
}

/// n-th eigenvalue (1-based, counted with multiplicity).
inline double nth_eigenvalue(const MetricGraph& g, const BoundaryCondition& bc, int n,
                             const SolverOptions& opts = {}) {
    const auto pairs = eigenvalues(g, bc, n, opts);
    int seen = 0;
    for (const Eigenpair& p : pairs) {
        seen += p.multiplicity;
        if (seen >= n) return p.mu;
    }
    throw ScanExhausted("eigenvalue index out of computed range");
}

/// The interlacing chain lambda_{n-1} >= L^N_{n-1} >= L^D_{n-beta} >=
/// mu_{n-beta}, with Dirichlet conditions on the degree-1 vertices for the
/// lambda term.
struct InterlacingReport {
    int n = 0;
    int beta = 0;
    double lambda_nm1 = 0.0;
    double l_neumann = 0.0;
    double l_dirichlet = 0.0;
    double mu_nmb = 0.0;
    double worst_slack = 0.0; // most negative normalized gap in the chain
    bool ok = false;
};

inline InterlacingReport verify_interlacing(const MetricGraph& g, int n,
                                            const MinPartOptions& opts = {}) {
    InterlacingReport rep;
    rep.beta = g.betti_number();
    rep.n = n;
    if (n < rep.beta + 1) throw ParseError("interlacing requires n >= beta + 1");
    if (n < 2) throw ParseError("interlacing requires n >= 2");

    rep.lambda_nm1 =
        nth_eigenvalue(g, BoundaryCondition::topological_boundary(g), n - 1, opts.solver);
    rep.l_neumann = minimal_partition_auto(g, n - 1, EnergyKind::neumann, opts).energy;
    rep.l_dirichlet = minimal_partition_auto(g, n - rep.beta, EnergyKind::dirichlet, opts).energy;
    rep.mu_nmb = nth_eigenvalue(g, BoundaryCondition::standard(), n - rep.beta, opts.solver);

    const double chain[4] = {rep.lambda_nm1, rep.l_neumann, rep.l_dirichlet, rep.mu_nmb};
    rep.worst_slack = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double scale = std::max({std::abs(chain[i]), std::abs(chain[i + 1]), 1.0});
        rep.worst_slack = std::min(rep.worst_slack, (chain[i] - chain[i + 1]) / scale);
    }
    rep.ok = rep.worst_slack >= -1e-6;
    return rep;
}

/// A random surgery trial: one connectivity-preserving cut applied inside a
/// cluster of a random partition.
struct SurgeryTrial {
    std::string move;
    double neumann_before = 0.0, neumann_after = 0.0;
    double dirichlet_before = 0.0, dirichlet_after = 0.0;
    bool ok = false;
};

struct SurgeryReport {
    std::vector<SurgeryTrial> trials;
    int effective = 0;
    bool ok = true;
};

/// Draws random partitions and applies one extra cut that keeps every
/// cluster connected (an interior cut of a cycle edge). Checks that the
/// Neumann energy never increases and the Dirichlet energy never decreases.
inline SurgeryReport verify_surgery_monotonicity(const MetricGraph& g, int trials,
                                                 std::uint64_t seed = 20240901ull,
                                                 const SolverOptions& solver = {}) {
    SurgeryReport rep;
    Lcg64 rng(seed);
    int attempts = 0;
    while (rep.effective < trials && attempts < 50 * trials + 100) {
        ++attempts;
        const int k = 2 + static_cast<int>(rng.next_below(2));
        std::vector<CutClass> classes;
        try {
            classes = part_detail::enumerate_classes(g, k, 100000);
        } catch (const Error&) {
            break;
        }
        if (classes.empty()) continue;
        const CutClass& cc = classes[rng.next_below(classes.size())];
        std::vector<double> pos;
        for (std::size_t d = 0; d < part_detail::canonical_positions(cc).size(); ++d)
            pos.push_back(rng.uniform(0.1, 0.9));
        Partition p;
        try {
            p = partition_by(g, part_detail::class_cutset(g, cc, pos));
        } catch (const Error&) {
            continue;
        }
        if (static_cast<int>(p.size()) != k) continue;

        // find a cluster edge lying on a cycle of its cluster
        std::vector<std::pair<std::size_t, EdgeId>> moves;
        for (std::size_t ci = 0; ci < p.clusters.size(); ++ci)
            for (const Edge& e : p.clusters[ci].graph.edges())
                if (p.clusters[ci].graph.edge_on_cycle(e.id)) moves.push_back({ci, e.id});
        if (moves.empty()) continue;
        const auto [ci, eid] = moves[rng.next_below(moves.size())];
        const Cluster& cl = p.clusters[ci];
        const EdgeSegment seg = cl.segment.at(eid);
        const double local = rng.uniform(0.1, 0.9) * cl.graph.edge(eid).length;

        CutSet extended = p.provenance;
        extended.interior.push_back({seg.parent, seg.a + local});
        Partition p2;
        try {
            p2 = partition_by(g, extended);
        } catch (const Error&) {
            continue;
        }
        if (p2.size() != p.size()) continue;

        SurgeryTrial t;
        t.move = "cut " + seg.parent + " inside cluster " + std::to_string(ci);
        t.neumann_before = lambda_neumann(p, solver).energy;
        t.neumann_after = lambda_neumann(p2, solver).energy;
        t.dirichlet_before = lambda_dirichlet(p, solver).energy;
        t.dirichlet_after = lambda_dirichlet(p2, solver).energy;
        const double sn = std::max(1.0, std::abs(t.neumann_before));
        const double sd = std::max(1.0, std::abs(t.dirichlet_before));
        t.ok = t.neumann_after <= t.neumann_before + 1e-8 * sn &&
               t.dirichlet_after >= t.dirichlet_before - 1e-8 * sd;
        rep.ok = rep.ok && t.ok;
        rep.trials.push_back(std::move(t));
        ++rep.effective;
    }
    return rep;
}

} // namespace qgraph
