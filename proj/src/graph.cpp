#include "swgcn/graph.hpp"
#include <cstdio>
#include <string>

#include <algorithm>
#include <cmath>

#include "swgcn/error.hpp"

namespace swgcn {

BehaviorGraph build_behavior_graph(const std::vector<Edge>& edges, int num_users, int num_items) {
    BehaviorGraph g;
    g.num_users = num_users;
    g.num_items = num_items;

    std::vector<std::pair<int, int>> sorted;
    sorted.reserve(edges.size());
    for (const Edge& e : edges) sorted.emplace_back(e.user, e.item);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    g.edge_user.reserve(sorted.size());
    g.edge_item.reserve(sorted.size());
    g.user_offsets.assign(num_users + 1, 0);
    g.item_edges.resize(num_items);
    for (int id = 0; id < static_cast<int>(sorted.size()); ++id) {
        const auto [u, i] = sorted[id];
        g.edge_user.push_back(u);
        g.edge_item.push_back(i);
        g.user_offsets[u + 1] += 1;
        g.item_edges[i].push_back(id);
    }
    for (int u = 0; u < num_users; ++u) g.user_offsets[u + 1] += g.user_offsets[u];
    return g;
}

std::vector<BehaviorGraph> build_behavior_graphs(const InteractionDataset& dataset) {
    std::vector<BehaviorGraph> graphs;
    graphs.reserve(dataset.num_behaviors);
    for (int r = 0; r < dataset.num_behaviors; ++r)
        graphs.push_back(build_behavior_graph(dataset.edges[r], dataset.num_users, dataset.num_items));
    return graphs;
}

WeightedAdjacency assemble_weighted_adjacency(const BehaviorGraph& graph,
                                              const std::vector<double>& weights,
                                              double self_loop) {
    if (static_cast<int>(weights.size()) != graph.num_edges())
        throw Error("consistency", "edge weight map covers " + std::to_string(weights.size()) +
                                       " of " + std::to_string(graph.num_edges()) + " edges");
    if (self_loop < 0.0) throw Error("config", "self-loop weight must be non-negative");
    return {&graph, self_loop, weights};
}

double adjacency_row_sum(const WeightedAdjacency& adj, int node) {
    const BehaviorGraph& g = *adj.graph;
    double sum = adj.self_loop;
    if (node < g.num_users) {
        const int begin = g.user_offsets[node];
        const int end = g.user_offsets[node + 1];
        for (int e = begin; e < end; ++e) sum += adj.weights[e];
    } else {
        for (int e : g.item_edges[node - g.num_users]) sum += adj.weights[e];
    }
    return sum;
}

NormalizedAdjacency degree_normalize(const WeightedAdjacency& adj, DegreeMode mode) {
    const BehaviorGraph& g = *adj.graph;
    const int n = g.num_nodes();
    NormalizedAdjacency out;
    out.graph = adj.graph;
    out.self_loop = adj.self_loop;
    out.degree.assign(n, 0.0);

    if (mode == DegreeMode::weighted) {
        for (int node = 0; node < n; ++node) out.degree[node] = adj.self_loop;
        for (int e = 0; e < g.num_edges(); ++e) {
            out.degree[g.edge_user[e]] += adj.weights[e];
            out.degree[g.num_users + g.edge_item[e]] += adj.weights[e];
        }
    } else {
        // Structural counts: neighbors plus the self-loop when present.
        const double self = adj.self_loop > 0.0 ? 1.0 : 0.0;
        for (int u = 0; u < g.num_users; ++u) out.degree[u] = self + g.user_degree(u);
        for (int i = 0; i < g.num_items; ++i) out.degree[g.num_users + i] = self + g.item_degree(i);
    }

    out.inv_sqrt_deg.resize(n);
    for (int node = 0; node < n; ++node)
        out.inv_sqrt_deg[node] = out.degree[node] > 0.0 ? 1.0 / std::sqrt(out.degree[node]) : 0.0;

    out.edge_value.resize(g.num_edges());
    for (int e = 0; e < g.num_edges(); ++e)
        out.edge_value[e] = adj.weights[e] * out.inv_sqrt_deg[g.edge_user[e]] *
                            out.inv_sqrt_deg[g.num_users + g.edge_item[e]];
    out.diag_value.resize(n);
    for (int node = 0; node < n; ++node)
        out.diag_value[node] = adj.self_loop * out.inv_sqrt_deg[node] * out.inv_sqrt_deg[node];
    return out;
}

std::string dump_adjacency_coo(const WeightedAdjacency& adj) {
    const BehaviorGraph& g = *adj.graph;
    std::string out;
    auto line = [&](int row, int col, double value) {
        out += std::to_string(row);
        out += ' ';
        out += std::to_string(col);
        out += ' ';
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        out += buf;
        out += '\n';
    };
    for (int node = 0; node < g.num_nodes(); ++node) {
        if (adj.self_loop != 0.0) line(node, node, adj.self_loop);
        if (node < g.num_users) {
            for (int e = g.user_offsets[node]; e < g.user_offsets[node + 1]; ++e)
                line(node, g.num_users + g.edge_item[e], adj.weights[e]);
        } else {
            for (int e : g.item_edges[node - g.num_users])
                line(node, g.edge_user[e], adj.weights[e]);
        }
    }
    return out;
}

void spmm(const NormalizedAdjacency& adj, const Matrix& in, Matrix& out) {
    const BehaviorGraph& g = *adj.graph;
    const std::size_t d = in.cols();
    if (out.rows() != in.rows() || out.cols() != d) out = Matrix(in.rows(), d);

    for (int node = 0; node < g.num_nodes(); ++node) {
        const double diag = adj.diag_value[node];
        auto dst = out.row(node);
        auto src = in.row(node);
        for (std::size_t k = 0; k < d; ++k) dst[k] = diag * src[k];
    }
    for (int e = 0; e < g.num_edges(); ++e) {
        const double value = adj.edge_value[e];
        if (value == 0.0) continue;
        const int u = g.edge_user[e];
        const int v = g.num_users + g.edge_item[e];
        auto row_u = out.row(u);
        auto row_v = out.row(v);
        auto in_u = in.row(u);
        auto in_v = in.row(v);
        for (std::size_t k = 0; k < d; ++k) {
            row_u[k] += value * in_v[k];
            row_v[k] += value * in_u[k];
        }
    }
}

} // namespace swgcn
