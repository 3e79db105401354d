#pragma once

#include <span>
#include <vector>

#include "swgcn/data.hpp"
#include "swgcn/matrix.hpp"

namespace swgcn {

// Bipartite graph of one behavior. Edge ids are positions in the row-major
// (user, item) sorted order, so ids are stable across runs.
struct BehaviorGraph {
    int num_users = 0;
    int num_items = 0;
    std::vector<int> edge_user;            // per edge id
    std::vector<int> edge_item;
    std::vector<int> user_offsets;         // CSR offsets: user u owns edges [user_offsets[u], user_offsets[u+1])
    std::vector<std::vector<int>> item_edges;  // per item, ascending edge ids

    int num_edges() const { return static_cast<int>(edge_user.size()); }
    int num_nodes() const { return num_users + num_items; }

    std::span<const int> user_edge_range(int u) const {
        return {edge_item.data() + user_offsets[u],
                static_cast<std::size_t>(user_offsets[u + 1] - user_offsets[u])};
    }
    int user_degree(int u) const { return user_offsets[u + 1] - user_offsets[u]; }
    int item_degree(int i) const { return static_cast<int>(item_edges[i].size()); }
};

BehaviorGraph build_behavior_graph(const std::vector<Edge>& edges, int num_users, int num_items);

std::vector<BehaviorGraph> build_behavior_graphs(const InteractionDataset& dataset);

// Self-looped weighted adjacency over user+item nodes: diagonal entries all
// equal self_loop, off-diagonal support mirrors the bipartite edges.
struct WeightedAdjacency {
    const BehaviorGraph* graph = nullptr;
    double self_loop = 0.0;
    std::vector<double> weights;   // per edge id
};

WeightedAdjacency assemble_weighted_adjacency(const BehaviorGraph& graph,
                                              const std::vector<double>& weights,
                                              double self_loop);

double adjacency_row_sum(const WeightedAdjacency& adj, int node);

enum class DegreeMode { weighted, structural };

// Symmetrically normalized adjacency: entry(m, n) = raw(m, n) / sqrt(d_m d_n)
// with d the adjacency row sums (or plain neighbor counts in structural mode);
// zero-degree rows stay all zero.
struct NormalizedAdjacency {
    const BehaviorGraph* graph = nullptr;
    double self_loop = 0.0;
    std::vector<double> degree;        // per node, users first then items
    std::vector<double> inv_sqrt_deg;  // 0 where degree == 0
    std::vector<double> edge_value;    // normalized off-diagonal per edge id
    std::vector<double> diag_value;    // normalized diagonal per node

    int num_nodes() const { return graph->num_nodes(); }
};

NormalizedAdjacency degree_normalize(const WeightedAdjacency& adj,
                                     DegreeMode mode = DegreeMode::weighted);

// out = normalized adjacency * in, shapes (num_nodes x d).
void spmm(const NormalizedAdjacency& adj, const Matrix& in, Matrix& out);

// Debug dump: "row col value" per nonzero, row-major with the diagonal first.
std::string dump_adjacency_coo(const WeightedAdjacency& adj);

} // namespace swgcn
