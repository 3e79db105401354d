#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swgcn/graph.hpp"
#include "swgcn/matrix.hpp"
#include "swgcn/rng.hpp"

namespace swgcn {

enum class Variant { base, swgcn_t, no_sat, no_tpw };
enum class SatMode { signed_diff, squared };

std::string to_string(Variant v);
std::string to_string(SatMode m);
Variant variant_from_string(const std::string& s);
SatMode sat_mode_from_string(const std::string& s);
DegreeMode degree_mode_from_string(const std::string& s);
std::string to_string(DegreeMode m);

// All trainable tensors. Embedding tables stack user rows 0..num_users-1 and
// item rows num_users..num_users+num_items-1; one table and one weigher
// vector per behavior, attention projections shared across behaviors.
struct ModelParams {
    int num_users = 0;
    int num_items = 0;
    int dim = 0;
    int num_behaviors = 0;
    std::vector<Matrix> embeddings;   // R x (num_nodes x dim)
    std::vector<Matrix> weigher;      // R x (1 x dim)
    Matrix attn_query, attn_key, attn_value;  // dim x dim

    int num_nodes() const { return num_users + num_items; }
    std::vector<std::pair<std::string, Matrix*>> tensors();
    std::vector<std::pair<std::string, const Matrix*>> tensors() const;
    double squared_norm() const;
};

ModelParams init_params(int num_users, int num_items, int dim, int num_behaviors,
                        std::uint64_t seed);

// Gradient accumulator shaped like ModelParams.
struct Gradients {
    std::vector<Matrix> embeddings;
    std::vector<Matrix> weigher;
    Matrix attn_query, attn_key, attn_value;

    static Gradients zeros_like(const ModelParams& params);
    std::vector<std::pair<std::string, Matrix*>> tensors();
    void scale(double factor);
};

// Per-edge weight map for one behavior, indexed by edge id.
using EdgeWeightMap = std::vector<double>;

// Softmax-normalized interaction weights over each user's neighborhood,
// driven by the elementwise |e_u - e_i| difference projected onto the
// behavior's weigher vector. logits_out captures the pre-activation values
// needed by the backward pass.
EdgeWeightMap target_preference_weights(const Matrix& embeddings0, const Matrix& weigher,
                                        const BehaviorGraph& graph,
                                        std::vector<double>* logits_out = nullptr);

// Squared Euclidean distance between layer-0 endpoint embeddings, per edge.
EdgeWeightMap auxiliary_preference_scores(const Matrix& embeddings0, const BehaviorGraph& graph);

// L steps of weighted propagation; in training mode every propagated layer
// gets inverted-scale message dropout. Returns the final layer only.
Matrix propagate(const NormalizedAdjacency& adj, const Matrix& embeddings0, int layers,
                 double p_message, bool training, Rng* rng);

// Per-node cross-behavior attention with residual: for node n and behavior r,
// scores (q_r . k_r') / sqrt(d) are softmaxed over r' and mix the value
// projections. alpha_out (optional) receives the coefficients laid out as
// [node][r][r'].
struct AttentionCache {
    std::vector<Matrix> q, k, v;      // per behavior, num_nodes x dim
    std::vector<double> alpha;        // [node][r][r'] softmax coefficients
};

std::vector<Matrix> attention_fuse(const std::vector<Matrix>& layer_final,
                                   const Matrix& attn_query, const Matrix& attn_key,
                                   const Matrix& attn_value,
                                   AttentionCache* cache_out = nullptr);

struct FusedEmbeddings {
    Matrix merged;        // num_nodes x dim, behavior-wise sum
    int num_users = 0;

    std::span<const double> user(int u) const { return merged.row(static_cast<std::size_t>(u)); }
    std::span<const double> item(int i) const {
        return merged.row(static_cast<std::size_t>(num_users + i));
    }
    int num_items() const { return static_cast<int>(merged.rows()) - num_users; }
};

FusedEmbeddings merge_and_split(const std::vector<Matrix>& fused_per_behavior, int num_users);

double predict(const FusedEmbeddings& fused, int user, int item);

struct ForwardOptions {
    double self_loop = 0.5;        // lambda_s
    int layers = 3;                // L
    double p_message = 0.0;
    bool training = false;
    Variant variant = Variant::base;
    DegreeMode degree_mode = DegreeMode::weighted;
};

// Which behaviors participate in the alignment loss under a variant.
std::vector<int> sat_behaviors(Variant variant, int num_behaviors);

// Everything the backward pass needs from one forward evaluation.
struct BehaviorForward {
    std::vector<double> tpw_logits;   // per edge, pre-activation (empty for no_tpw)
    EdgeWeightMap tpw;                // per edge (all ones for no_tpw)
    EdgeWeightMap apv;                // per edge, only for alignment behaviors
    NormalizedAdjacency norm;
    std::vector<Matrix> layer;        // 0..L, values actually fed forward (post-dropout)
    std::vector<Matrix> drop_scale;   // layers 1..L: entry factor 0 or 1/(1-p); empty in eval mode
    Matrix attn_q, attn_k, attn_v;    // num_nodes x dim
    Matrix behavior_fused;            // residual + attention mix for this behavior
};

struct ForwardResult {
    std::vector<BehaviorForward> behavior;
    std::vector<double> attn_alpha;    // num_nodes * R * R
    FusedEmbeddings fused;
    double self_loop = 0.0;           // echo of the options used
};

ForwardResult forward(const ModelParams& params, const std::vector<BehaviorGraph>& graphs,
                      const ForwardOptions& options, Rng* dropout_rng = nullptr);

// Adjoints of the loss with respect to forward outputs. merged is dL/dE*;
// tpw/apv are per-behavior per-edge adjoints from the alignment loss (the
// propagation path contribution to the weights is handled internally).
struct LossAdjoints {
    Matrix merged;
    std::vector<std::vector<double>> tpw;
    std::vector<std::vector<double>> apv;
};

Gradients backward(const ModelParams& params, const std::vector<BehaviorGraph>& graphs,
                   const ForwardOptions& options, const ForwardResult& cache,
                   const LossAdjoints& adjoints);

} // namespace swgcn
