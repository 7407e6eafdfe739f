#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "qgraph/errors.hpp"

namespace qgraph {

using VertexId = std::string;
using EdgeId = std::string;

/// An edge is an interval [0, length] with a fixed orientation from `from`
/// (coordinate 0) to `to` (coordinate length). Loops (from == to) and
/// parallel edges are allowed.
struct Edge {
    EdgeId id;
    VertexId from;
    VertexId to;
    double length = 0.0;
};

/// A point of the graph, addressed by edge and coordinate in [0, length].
struct GraphPoint {
    EdgeId edge;
    double x = 0.0;

    friend bool operator==(const GraphPoint& a, const GraphPoint& b) {
        return a.edge == b.edge && a.x == b.x;
    }
    friend bool operator<(const GraphPoint& a, const GraphPoint& b) {
        return a.edge != b.edge ? a.edge < b.edge : a.x < b.x;
    }
};

/// One of the two ends of an edge, used to describe what is incident to a
/// vertex. A loop contributes two distinct ends at the same vertex.
struct EdgeEnd {
    EdgeId edge;
    bool at_source = true; // true: coordinate 0, false: coordinate length

    friend bool operator==(const EdgeEnd& a, const EdgeEnd& b) {
        return a.edge == b.edge && a.at_source == b.at_source;
    }
    friend bool operator<(const EdgeEnd& a, const EdgeEnd& b) {
        return a.edge != b.edge ? a.edge < b.edge : a.at_source > b.at_source;
    }
};

/// Splitting a vertex into >= 2 groups of its incident edge ends.
struct VertexSplit {
    VertexId vertex;
    std::vector<std::vector<EdgeEnd>> groups;
};

/// A set of cut points: strictly interior edge points plus vertex splits.
/// Endpoint-coordinate points (x == 0 or x == length) are normalized into
/// vertex splits before cutting.
struct CutSet {
    std::vector<GraphPoint> interior;
    std::vector<VertexSplit> splits;

    bool empty() const { return interior.empty() && splits.empty(); }
    std::size_t cut_count() const { return interior.size() + splits.size(); }
};

namespace detail {

inline std::string fmt_coord(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
    }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

} // namespace detail

/// Immutable compact metric graph. Vertices and edges are kept sorted by id
/// so every derived quantity is reproducible.
class MetricGraph {
public:
    MetricGraph() = default;

    /// Validating constructor for top-level graphs: checks lengths,
    /// endpoint references and connectivity.
    static MetricGraph build(std::vector<VertexId> vertices, std::vector<Edge> edges) {
        MetricGraph g = build_unchecked(std::move(vertices), std::move(edges));
        for (const Edge& e : g.edges_) {
            if (!(e.length > 0.0) || !std::isfinite(e.length))
                throw ZeroOrNegativeLength("edge '" + e.id + "' has non-positive length");
        }
        if (g.edges_.empty())
            throw Disconnected("graph has no edges");
        if (g.component_count() != 1)
            throw Disconnected("graph is not connected");
        return g;
    }

    /// Structural constructor without the connectivity requirement; used for
    /// cut graphs and internal subgraphs. Id uniqueness and endpoint
    /// references are still enforced.
    static MetricGraph build_unchecked(std::vector<VertexId> vertices, std::vector<Edge> edges) {
        MetricGraph g;
        std::sort(vertices.begin(), vertices.end());
        for (std::size_t i = 0; i + 1 < vertices.size(); ++i)
            if (vertices[i] == vertices[i + 1])
                throw ParseError("duplicate vertex id '" + vertices[i] + "'");
        for (const VertexId& v : vertices)
            if (v.empty()) throw ParseError("empty vertex id");
        g.vertices_ = std::move(vertices);
        for (std::size_t i = 0; i < g.vertices_.size(); ++i)
            g.vertex_index_[g.vertices_[i]] = i;

        std::sort(edges.begin(), edges.end(),
                  [](const Edge& a, const Edge& b) { return a.id < b.id; });
        for (std::size_t i = 0; i + 1 < edges.size(); ++i)
            if (edges[i].id == edges[i + 1].id)
                throw ParseError("duplicate edge id '" + edges[i].id + "'");
        for (const Edge& e : edges) {
            if (e.id.empty()) throw ParseError("empty edge id");
            if (!g.vertex_index_.count(e.from))
                throw DanglingEndpoint("edge '" + e.id + "' references unknown vertex '" + e.from + "'");
            if (!g.vertex_index_.count(e.to))
                throw DanglingEndpoint("edge '" + e.id + "' references unknown vertex '" + e.to + "'");
        }
        g.edges_ = std::move(edges);
        for (std::size_t i = 0; i < g.edges_.size(); ++i)
            g.edge_index_[g.edges_[i].id] = i;
        return g;
    }

    const std::vector<VertexId>& vertices() const { return vertices_; }
    const std::vector<Edge>& edges() const { return edges_; }

    bool has_vertex(const VertexId& v) const { return vertex_index_.count(v) != 0; }
    bool has_edge(const EdgeId& e) const { return edge_index_.count(e) != 0; }

    std::size_t vertex_index(const VertexId& v) const {
        auto it = vertex_index_.find(v);
        if (it == vertex_index_.end()) throw ParseError("unknown vertex '" + v + "'");
        return it->second;
    }
    std::size_t edge_index(const EdgeId& e) const {
        auto it = edge_index_.find(e);
        if (it == edge_index_.end()) throw CutPointOffGraph("unknown edge '" + e + "'");
        return it->second;
    }
    const Edge& edge(const EdgeId& e) const { return edges_[edge_index(e)]; }

    /// Incident edge ends at a vertex, sorted. A loop appears twice.
    std::vector<EdgeEnd> ends_at(const VertexId& v) const {
        std::vector<EdgeEnd> out;
        for (const Edge& e : edges_) {
            if (e.from == v) out.push_back({e.id, true});
            if (e.to == v) out.push_back({e.id, false});
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Degree of a vertex; a loop counts twice.
    int degree(const VertexId& v) const { return static_cast<int>(ends_at(v).size()); }

    VertexId end_vertex(const EdgeEnd& end) const {
        const Edge& e = edge(end.edge);
        return end.at_source ? e.from : e.to;
    }

    double total_length() const {
        double s = 0.0;
        for (const Edge& e : edges_) s += e.length;
        return s;
    }

    double min_edge_length() const {
        double m = edges_.empty() ? 0.0 : edges_.front().length;
        for (const Edge& e : edges_) m = std::min(m, e.length);
        return m;
    }

    int component_count() const {
        detail::UnionFind uf(vertices_.size());
        for (const Edge& e : edges_)
            uf.unite(vertex_index(e.from), vertex_index(e.to));
        std::set<std::size_t> roots;
        for (std::size_t i = 0; i < vertices_.size(); ++i) roots.insert(uf.find(i));
        return static_cast<int>(roots.size());
    }

    /// Component label per vertex, numbered by first occurrence in sorted
    /// vertex order.
    std::vector<int> component_labels() const {
        detail::UnionFind uf(vertices_.size());
        for (const Edge& e : edges_)
            uf.unite(vertex_index(e.from), vertex_index(e.to));
        std::map<std::size_t, int> number;
        std::vector<int> label(vertices_.size());
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            std::size_t r = uf.find(i);
            auto [it, fresh] = number.emplace(r, static_cast<int>(number.size()));
            label[i] = it->second;
        }
        return label;
    }

    bool connected() const { return component_count() == 1; }

    /// First Betti number |E| - |V| + 1 of a connected graph.
    int betti_number() const {
        if (!connected()) throw Disconnected("betti_number requires a connected graph");
        return static_cast<int>(edges_.size()) - static_cast<int>(vertices_.size()) + 1;
    }

    bool is_tree() const { return betti_number() == 0; }

    /// True if `e` lies on some cycle, i.e. cutting it keeps the graph
    /// connected.
    bool edge_on_cycle(const EdgeId& e) const {
        const Edge& ed = edge(e);
        if (ed.from == ed.to) return true;
        detail::UnionFind uf(vertices_.size());
        for (const Edge& other : edges_) {
            if (other.id == e) continue;
            uf.unite(vertex_index(other.from), vertex_index(other.to));
        }
        return uf.find(vertex_index(ed.from)) == uf.find(vertex_index(ed.to));
    }

    bool contains(const GraphPoint& p) const {
        if (!has_edge(p.edge)) return false;
        const Edge& e = edge(p.edge);
        return p.x >= 0.0 && p.x <= e.length;
    }

private:
    std::vector<VertexId> vertices_;
    std::vector<Edge> edges_;
    std::map<VertexId, std::size_t> vertex_index_;
    std::map<EdgeId, std::size_t> edge_index_;
};

/// Where a derived edge sits inside its parent edge.
struct EdgeSegment {
    EdgeId parent;
    double a = 0.0; // parent coordinate of derived coordinate 0
    double b = 0.0; // parent coordinate of derived coordinate length
};

/// Result of cutting a graph: a (possibly disconnected) graph together with
/// provenance data relating it back to the parent.
struct CutGraph {
    MetricGraph graph;
    std::vector<VertexId> cut_vertices;            // vertices created by the cut
    std::map<VertexId, std::string> origin_key;    // cut vertex -> parent point key
    std::map<EdgeId, EdgeSegment> segment;         // derived edge -> parent slice
};

/// One connected cluster of a partition, with the boundary points the cut
/// created in it.
struct Cluster {
    MetricGraph graph;
    std::vector<VertexId> boundary;                // cut vertices inside this cluster
    std::map<VertexId, std::string> boundary_origin;
    std::map<EdgeId, EdgeSegment> segment;
};

/// An exhaustive partition: connected clusters covering the parent graph,
/// plus the cut set it came from.
struct Partition {
    std::vector<Cluster> clusters;
    CutSet provenance;

    std::size_t size() const { return clusters.size(); }
};

/// Canonical key identifying a parent point: interior cut points by edge and
/// coordinate, split vertices by vertex id. Clusters sharing a key meet at
/// that point.
inline std::string parent_point_key(const GraphPoint& p) {
    return p.edge + "@" + detail::fmt_coord(p.x);
}
inline std::string parent_point_key(const VertexId& v) { return "v:" + v; }

/// Normalizes a cut set: endpoint-coordinate interior cuts become vertex
/// splits separating that edge end from the rest. Duplicates are rejected.
inline CutSet normalize_cutset(const MetricGraph& g, const CutSet& cuts) {
    CutSet out;
    std::map<VertexId, std::vector<EdgeEnd>> forced_off; // ends to split off

    for (const GraphPoint& p : cuts.interior) {
        if (!g.has_edge(p.edge))
            throw CutPointOffGraph("cut references unknown edge '" + p.edge + "'");
        const Edge& e = g.edge(p.edge);
        if (p.x < 0.0 || p.x > e.length || !std::isfinite(p.x))
            throw CutPointOffGraph("cut coordinate outside edge '" + p.edge + "'");
        if (p.x == 0.0) {
            forced_off[e.from].push_back({e.id, true});
        } else if (p.x == e.length) {
            forced_off[e.to].push_back({e.id, false});
        } else {
            out.interior.push_back(p);
        }
    }
    std::sort(out.interior.begin(), out.interior.end());
    for (std::size_t i = 0; i + 1 < out.interior.size(); ++i)
        if (out.interior[i] == out.interior[i + 1])
            throw DuplicateCut("duplicate interior cut on edge '" + out.interior[i].edge + "'");

    std::set<VertexId> seen_split;
    for (const VertexSplit& s : cuts.splits) {
        if (!g.has_vertex(s.vertex))
            throw CutPointOffGraph("split references unknown vertex '" + s.vertex + "'");
        if (!seen_split.insert(s.vertex).second)
            throw DuplicateCut("vertex '" + s.vertex + "' split twice");
        if (s.groups.size() < 2)
            throw CutPointOffGraph("vertex split needs at least 2 groups");
        std::vector<EdgeEnd> all = g.ends_at(s.vertex);
        std::vector<EdgeEnd> listed;
        for (const auto& grp : s.groups) {
            if (grp.empty()) throw CutPointOffGraph("empty vertex-split group");
            listed.insert(listed.end(), grp.begin(), grp.end());
        }
        std::sort(listed.begin(), listed.end());
        if (listed != all)
            throw CutPointOffGraph("vertex split groups must partition the incident edge ends of '" +
                                   s.vertex + "'");
        VertexSplit canon = s;
        for (auto& grp : canon.groups) std::sort(grp.begin(), grp.end());
        std::sort(canon.groups.begin(), canon.groups.end());
        out.splits.push_back(std::move(canon));
    }

    // endpoint cuts: merge into a split {end} | {rest}
    for (auto& [v, offs] : forced_off) {
        if (seen_split.count(v))
            throw DuplicateCut("vertex '" + v + "' both split and endpoint-cut");
        std::sort(offs.begin(), offs.end());
        offs.erase(std::unique(offs.begin(), offs.end()), offs.end());
        std::vector<EdgeEnd> rest;
        for (const EdgeEnd& end : g.ends_at(v))
            if (!std::binary_search(offs.begin(), offs.end(), end)) rest.push_back(end);
        VertexSplit s{v, {}};
        for (const EdgeEnd& end : offs) s.groups.push_back({end});
        if (!rest.empty()) s.groups.push_back(rest);
        if (s.groups.size() < 2)
            throw CutPointOffGraph("endpoint cut at degree-1 vertex '" + v + "' does nothing");
        std::sort(s.groups.begin(), s.groups.end());
        out.splits.push_back(std::move(s));
    }
    std::sort(out.splits.begin(), out.splits.end(),
              [](const VertexSplit& a, const VertexSplit& b) { return a.vertex < b.vertex; });
    return out;
}

/// Cuts the graph. Interior cuts replace an edge by two edges ending at two
/// new degree-1 vertices; a vertex split replaces the vertex by one new
/// vertex per group. Total length is preserved exactly.
inline CutGraph apply_cut(const MetricGraph& g, const CutSet& raw_cuts) {
    const CutSet cuts = normalize_cutset(g, raw_cuts);
    CutGraph out;

    std::map<EdgeId, std::vector<double>> cuts_on_edge;
    for (const GraphPoint& p : cuts.interior) cuts_on_edge[p.edge].push_back(p.x);

    std::vector<VertexId> vertices = g.vertices();
    std::vector<Edge> edges;

    // split edges at interior cut points
    std::map<EdgeEnd, EdgeEnd> end_map; // parent edge end -> derived edge end
    for (const Edge& e : g.edges()) {
        auto it = cuts_on_edge.find(e.id);
        if (it == cuts_on_edge.end()) {
            edges.push_back(e);
            out.segment[e.id] = {e.id, 0.0, e.length};
            end_map[{e.id, true}] = {e.id, true};
            end_map[{e.id, false}] = {e.id, false};
            continue;
        }
        std::vector<double>& xs = it->second;
        std::sort(xs.begin(), xs.end());
        const std::size_t n = xs.size();
        for (std::size_t j = 0; j <= n; ++j) {
            const double a = (j == 0) ? 0.0 : xs[j - 1];
            const double b = (j == n) ? e.length : xs[j];
            Edge seg;
            seg.id = e.id + "#" + std::to_string(j + 1);
            seg.length = b - a;
            if (seg.length <= 0.0)
                throw DuplicateCut("coincident cut points on edge '" + e.id + "'");
            if (j == 0) {
                seg.from = e.from;
                end_map[{e.id, true}] = {seg.id, true};
            } else {
                seg.from = e.id + "@" + std::to_string(j) + "b";
                vertices.push_back(seg.from);
                out.cut_vertices.push_back(seg.from);
                out.origin_key[seg.from] = parent_point_key(GraphPoint{e.id, xs[j - 1]});
            }
            if (j == n) {
                seg.to = e.to;
                end_map[{e.id, false}] = {seg.id, false};
            } else {
                seg.to = e.id + "@" + std::to_string(j + 1) + "a";
                vertices.push_back(seg.to);
                out.cut_vertices.push_back(seg.to);
                out.origin_key[seg.to] = parent_point_key(GraphPoint{e.id, xs[j]});
            }
            out.segment[seg.id] = {e.id, a, b};
            edges.push_back(std::move(seg));
        }
    }

    // vertex splits: retarget derived edge ends group by group
    for (const VertexSplit& s : cuts.splits) {
        std::map<EdgeEnd, VertexId> assign;
        for (std::size_t gi = 0; gi < s.groups.size(); ++gi) {
            VertexId nv = s.vertex + "/" + std::to_string(gi + 1);
            vertices.push_back(nv);
            out.cut_vertices.push_back(nv);
            out.origin_key[nv] = parent_point_key(s.vertex);
            for (const EdgeEnd& end : s.groups[gi]) assign[end] = nv;
        }
        vertices.erase(std::remove(vertices.begin(), vertices.end(), s.vertex), vertices.end());
        for (auto& [parent_end, derived_end] : end_map) {
            auto it = assign.find(parent_end);
            if (it == assign.end()) continue;
            for (Edge& e : edges) {
                if (e.id != derived_end.edge) continue;
                if (derived_end.at_source) e.from = it->second;
                else e.to = it->second;
            }
        }
    }

    out.graph = MetricGraph::build_unchecked(std::move(vertices), std::move(edges));
    std::sort(out.cut_vertices.begin(), out.cut_vertices.end());
    return out;
}

/// Connected components of a cut graph, as an exhaustive partition with
/// boundary maps.
inline Partition components(const CutGraph& cg, CutSet provenance = {}) {
    const MetricGraph& g = cg.graph;
    std::vector<int> label = g.component_labels();
    int n = 0;
    for (int l : label) n = std::max(n, l + 1);

    Partition p;
    p.provenance = std::move(provenance);
    p.clusters.resize(static_cast<std::size_t>(n));

    std::vector<std::vector<VertexId>> vs(static_cast<std::size_t>(n));
    std::vector<std::vector<Edge>> es(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < g.vertices().size(); ++i)
        vs[static_cast<std::size_t>(label[i])].push_back(g.vertices()[i]);
    for (const Edge& e : g.edges())
        es[static_cast<std::size_t>(label[g.vertex_index(e.from)])].push_back(e);

    for (int c = 0; c < n; ++c) {
        Cluster& cl = p.clusters[static_cast<std::size_t>(c)];
        cl.graph = MetricGraph::build_unchecked(vs[static_cast<std::size_t>(c)],
                                                es[static_cast<std::size_t>(c)]);
        for (const VertexId& v : cg.cut_vertices) {
            if (!cl.graph.has_vertex(v)) continue;
            cl.boundary.push_back(v);
            cl.boundary_origin[v] = cg.origin_key.at(v);
        }
        for (const Edge& e : cl.graph.edges()) cl.segment[e.id] = cg.segment.at(e.id);
    }
    return p;
}

/// Trivial partition of an uncut graph.
inline Partition components(const MetricGraph& g) {
    CutGraph cg;
    cg.graph = g;
    for (const Edge& e : g.edges()) cg.segment[e.id] = {e.id, 0.0, e.length};
    return components(cg);
}

/// Cut and decompose in one step.
inline Partition partition_by(const MetricGraph& g, const CutSet& cuts) {
    CutGraph cg = apply_cut(g, cuts);
    return components(cg, normalize_cutset(g, cuts));
}

} // namespace qgraph
