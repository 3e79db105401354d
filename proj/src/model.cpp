#include "swgcn/model.hpp"

#include <algorithm>
#include <cmath>

#include "swgcn/error.hpp"

namespace swgcn {

namespace {

double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

} // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::base: return "base";
        case Variant::swgcn_t: return "swgcn_t";
        case Variant::no_sat: return "no_sat";
        case Variant::no_tpw: return "no_tpw";
    }
    return "base";
}

std::string to_string(SatMode m) { return m == SatMode::signed_diff ? "signed" : "squared"; }

std::string to_string(DegreeMode m) { return m == DegreeMode::weighted ? "weighted" : "structural"; }

Variant variant_from_string(const std::string& s) {
    if (s == "base") return Variant::base;
    if (s == "swgcn_t") return Variant::swgcn_t;
    if (s == "no_sat") return Variant::no_sat;
    if (s == "no_tpw") return Variant::no_tpw;
    throw Error("config", "unknown variant '" + s + "'");
}

SatMode sat_mode_from_string(const std::string& s) {
    if (s == "signed") return SatMode::signed_diff;
    if (s == "squared") return SatMode::squared;
    throw Error("config", "unknown sat mode '" + s + "'");
}

DegreeMode degree_mode_from_string(const std::string& s) {
    if (s == "weighted") return DegreeMode::weighted;
    if (s == "structural") return DegreeMode::structural;
    throw Error("config", "unknown degree mode '" + s + "'");
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    for (int r = 0; r < num_behaviors; ++r)
        out.emplace_back("embedding." + std::to_string(r), &embeddings[r]);
    for (int r = 0; r < num_behaviors; ++r)
        out.emplace_back("weigher." + std::to_string(r), &weigher[r]);
    out.emplace_back("attn.query", &attn_query);
    out.emplace_back("attn.key", &attn_key);
    out.emplace_back("attn.value", &attn_value);
    return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::tensors() const {
    auto mutable_view = const_cast<ModelParams*>(this)->tensors();
    std::vector<std::pair<std::string, const Matrix*>> out;
    out.reserve(mutable_view.size());
    for (auto& [name, m] : mutable_view) out.emplace_back(name, m);
    return out;
}

double ModelParams::squared_norm() const {
    double total = 0.0;
    for (const auto& [name, m] : tensors())
        for (double v : m->values()) total += v * v;
    return total;
}

ModelParams init_params(int num_users, int num_items, int dim, int num_behaviors,
                        std::uint64_t seed) {
    if (num_users <= 0 || num_items <= 0 || dim <= 0 || num_behaviors <= 0)
        throw Error("config", "model dimensions must be positive");
    ModelParams p;
    p.num_users = num_users;
    p.num_items = num_items;
    p.dim = dim;
    p.num_behaviors = num_behaviors;

    Rng rng(seed);
    auto xavier_fill = [&](Matrix& m, double fan_in, double fan_out) {
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : m.values()) v = rng.uniform_range(-bound, bound);
    };

    const int nodes = num_users + num_items;
    p.embeddings.reserve(num_behaviors);
    p.weigher.reserve(num_behaviors);
    for (int r = 0; r < num_behaviors; ++r) {
        Matrix e(nodes, dim);
        xavier_fill(e, dim, dim);  // embedding tables use fan_in = fan_out = dim
        p.embeddings.push_back(std::move(e));
    }
    for (int r = 0; r < num_behaviors; ++r) {
        Matrix b(1, dim);
        xavier_fill(b, 1, dim);
        p.weigher.push_back(std::move(b));
    }
    p.attn_query = Matrix(dim, dim);
    p.attn_key = Matrix(dim, dim);
    p.attn_value = Matrix(dim, dim);
    xavier_fill(p.attn_query, dim, dim);
    xavier_fill(p.attn_key, dim, dim);
    xavier_fill(p.attn_value, dim, dim);
    return p;
}

Gradients Gradients::zeros_like(const ModelParams& params) {
    Gradients g;
    for (const auto& e : params.embeddings) g.embeddings.emplace_back(e.rows(), e.cols());
    for (const auto& b : params.weigher) g.weigher.emplace_back(b.rows(), b.cols());
    g.attn_query = Matrix(params.dim, params.dim);
    g.attn_key = Matrix(params.dim, params.dim);
    g.attn_value = Matrix(params.dim, params.dim);
    return g;
}

std::vector<std::pair<std::string, Matrix*>> Gradients::tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    for (std::size_t r = 0; r < embeddings.size(); ++r)
        out.emplace_back("embedding." + std::to_string(r), &embeddings[r]);
    for (std::size_t r = 0; r < weigher.size(); ++r)
        out.emplace_back("weigher." + std::to_string(r), &weigher[r]);
    out.emplace_back("attn.query", &attn_query);
    out.emplace_back("attn.key", &attn_key);
    out.emplace_back("attn.value", &attn_value);
    return out;
}

void Gradients::scale(double factor) {
    for (auto& [name, m] : tensors())
        for (double& v : m->values()) v *= factor;
}

EdgeWeightMap target_preference_weights(const Matrix& embeddings0, const Matrix& weigher,
                                        const BehaviorGraph& graph,
                                        std::vector<double>* logits_out) {
    const std::size_t d = embeddings0.cols();
    if (weigher.cols() != d) throw Error("consistency", "weigher width differs from embedding dim");

    EdgeWeightMap weights(graph.num_edges(), 0.0);
    std::vector<double> logits(graph.num_edges(), 0.0);
    for (int e = 0; e < graph.num_edges(); ++e) {
        auto user_row = embeddings0.row(graph.edge_user[e]);
        auto item_row = embeddings0.row(graph.num_users + graph.edge_item[e]);
        double z = 0.0;
        for (std::size_t k = 0; k < d; ++k)
            z += std::abs(user_row[k] - item_row[k]) * weigher(0, k);
        logits[e] = z;
    }

    // Per-user softmax over the activated logits, max-shifted for stability.
    for (int u = 0; u < graph.num_users; ++u) {
        const int begin = graph.user_offsets[u];
        const int end = graph.user_offsets[u + 1];
        if (begin == end) continue;
        double max_h = -1e300;
        for (int e = begin; e < end; ++e) max_h = std::max(max_h, elu(logits[e]));
        double denom = 0.0;
        for (int e = begin; e < end; ++e) {
            weights[e] = std::exp(elu(logits[e]) - max_h);
            denom += weights[e];
        }
        for (int e = begin; e < end; ++e) weights[e] /= denom;
    }
    if (logits_out) *logits_out = std::move(logits);
    return weights;
}

EdgeWeightMap auxiliary_preference_scores(const Matrix& embeddings0, const BehaviorGraph& graph) {
    const std::size_t d = embeddings0.cols();
    EdgeWeightMap scores(graph.num_edges(), 0.0);
    for (int e = 0; e < graph.num_edges(); ++e) {
        auto user_row = embeddings0.row(graph.edge_user[e]);
        auto item_row = embeddings0.row(graph.num_users + graph.edge_item[e]);
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = user_row[k] - item_row[k];
            s += diff * diff;
        }
        scores[e] = s;
    }
    return scores;
}

namespace {

void apply_dropout(Matrix& m, double p, Rng& rng, Matrix* scale_out) {
    const double keep_scale = 1.0 / (1.0 - p);
    if (scale_out) *scale_out = Matrix(m.rows(), m.cols());
    auto& values = m.values();
    for (std::size_t idx = 0; idx < values.size(); ++idx) {
        const double factor = rng.uniform() < p ? 0.0 : keep_scale;
        values[idx] *= factor;
        if (scale_out) scale_out->values()[idx] = factor;
    }
}

} // namespace

Matrix propagate(const NormalizedAdjacency& adj, const Matrix& embeddings0, int layers,
                 double p_message, bool training, Rng* rng) {
    if (layers < 1) throw Error("config", "propagation depth must be >= 1");
    if (p_message < 0.0 || p_message >= 1.0) throw Error("config", "p_message must lie in [0, 1)");
    if (training && p_message > 0.0 && !rng)
        throw Error("config", "training-mode dropout needs a generator");

    Matrix current = embeddings0;
    Matrix next;
    for (int l = 1; l <= layers; ++l) {
        spmm(adj, current, next);
        std::swap(current, next);
        if (training && p_message > 0.0) apply_dropout(current, p_message, *rng, nullptr);
    }
    return current;
}

std::vector<Matrix> attention_fuse(const std::vector<Matrix>& layer_final,
                                   const Matrix& attn_query, const Matrix& attn_key,
                                   const Matrix& attn_value,
                                   AttentionCache* cache_out) {
    const int R = static_cast<int>(layer_final.size());
    if (R == 0) throw Error("consistency", "attention needs at least one behavior");
    const std::size_t n = layer_final[0].rows();
    const std::size_t d = layer_final[0].cols();
    for (const auto& m : layer_final)
        if (m.rows() != n || m.cols() != d)
            throw Error("consistency", "behavior embedding shapes differ");

    std::vector<Matrix> q(R), k(R), v(R);
    for (int r = 0; r < R; ++r) {
        q[r] = matmul(layer_final[r], attn_query);
        k[r] = matmul(layer_final[r], attn_key);
        v[r] = matmul(layer_final[r], attn_value);
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Matrix> fused(R);
    for (int r = 0; r < R; ++r) fused[r] = layer_final[r];
    std::vector<double> alpha_store(n * R * R, 0.0);

    std::vector<double> scores(R);
    for (std::size_t node = 0; node < n; ++node) {
        for (int r = 0; r < R; ++r) {
            auto q_row = q[r].row(node);
            double max_s = -1e300;
            for (int r2 = 0; r2 < R; ++r2) {
                scores[r2] = dot(q_row, k[r2].row(node)) * inv_sqrt_d;
                max_s = std::max(max_s, scores[r2]);
            }
            double denom = 0.0;
            for (int r2 = 0; r2 < R; ++r2) {
                scores[r2] = std::exp(scores[r2] - max_s);
                denom += scores[r2];
            }
            auto out_row = fused[r].row(node);
            for (int r2 = 0; r2 < R; ++r2) {
                const double alpha = scores[r2] / denom;
                alpha_store[(node * R + r) * R + r2] = alpha;
                auto v_row = v[r2].row(node);
                for (std::size_t c = 0; c < d; ++c) out_row[c] += alpha * v_row[c];
            }
        }
    }
    if (cache_out) {
        cache_out->q = std::move(q);
        cache_out->k = std::move(k);
        cache_out->v = std::move(v);
        cache_out->alpha = std::move(alpha_store);
    }
    return fused;
}

FusedEmbeddings merge_and_split(const std::vector<Matrix>& fused_per_behavior, int num_users) {
    if (fused_per_behavior.empty()) throw Error("consistency", "nothing to merge");
    FusedEmbeddings out;
    out.num_users = num_users;
    out.merged = fused_per_behavior[0];
    for (std::size_t r = 1; r < fused_per_behavior.size(); ++r)
        out.merged.add_scaled(fused_per_behavior[r], 1.0);
    return out;
}

double predict(const FusedEmbeddings& fused, int user, int item) {
    if (user < 0 || user >= fused.num_users)
        throw Error("bounds", "user index " + std::to_string(user) + " out of range");
    if (item < 0 || item >= fused.num_items())
        throw Error("bounds", "item index " + std::to_string(item) + " out of range");
    return dot(fused.user(user), fused.item(item));
}

std::vector<int> sat_behaviors(Variant variant, int num_behaviors) {
    std::vector<int> included;
    if (variant == Variant::no_sat || variant == Variant::no_tpw) return included;
    const int last = variant == Variant::swgcn_t ? num_behaviors : num_behaviors - 1;
    for (int r = 0; r < last; ++r) included.push_back(r);
    return included;
}

ForwardResult forward(const ModelParams& params, const std::vector<BehaviorGraph>& graphs,
                      const ForwardOptions& options, Rng* dropout_rng) {
    const int R = params.num_behaviors;
    if (static_cast<int>(graphs.size()) != R)
        throw Error("consistency", "graph count differs from behavior count");
    if (options.p_message < 0.0 || options.p_message >= 1.0)
        throw Error("config", "p_message must lie in [0, 1)");
    const bool dropout = options.training && options.p_message > 0.0;
    if (dropout && !dropout_rng) throw Error("config", "training-mode dropout needs a generator");

    ForwardResult result;
    result.behavior.resize(R);
    result.self_loop = options.self_loop;
    const auto aligned = sat_behaviors(options.variant, R);

    for (int r = 0; r < R; ++r) {
        auto& bf = result.behavior[r];
        const BehaviorGraph& g = graphs[r];

        if (options.variant == Variant::no_tpw) {
            bf.tpw.assign(g.num_edges(), 1.0);
        } else {
            bf.tpw = target_preference_weights(params.embeddings[r], params.weigher[r], g,
                                               &bf.tpw_logits);
        }
        if (std::find(aligned.begin(), aligned.end(), r) != aligned.end())
            bf.apv = auxiliary_preference_scores(params.embeddings[r], g);

        const auto adj = assemble_weighted_adjacency(g, bf.tpw, options.self_loop);
        bf.norm = degree_normalize(adj, options.degree_mode);

        bf.layer.resize(options.layers + 1);
        bf.layer[0] = params.embeddings[r];
        if (dropout) bf.drop_scale.resize(options.layers);
        for (int l = 1; l <= options.layers; ++l) {
            spmm(bf.norm, bf.layer[l - 1], bf.layer[l]);
            if (dropout)
                apply_dropout(bf.layer[l], options.p_message, *dropout_rng, &bf.drop_scale[l - 1]);
        }
    }

    std::vector<Matrix> finals(R);
    for (int r = 0; r < R; ++r) finals[r] = result.behavior[r].layer[options.layers];
    AttentionCache attn;
    auto fused = attention_fuse(finals, params.attn_query, params.attn_key, params.attn_value,
                                &attn);
    result.attn_alpha = std::move(attn.alpha);
    for (int r = 0; r < R; ++r) {
        result.behavior[r].attn_q = std::move(attn.q[r]);
        result.behavior[r].attn_k = std::move(attn.k[r]);
        result.behavior[r].attn_v = std::move(attn.v[r]);
        result.behavior[r].behavior_fused = fused[r];
    }
    result.fused = merge_and_split(fused, params.num_users);
    return result;
}

namespace {

// Adjoint of the symmetric normalization: folds gradients on normalized
// entries back onto the raw edge weights, including the degree dependence.
std::vector<double> normalization_backward(const BehaviorGraph& g, const NormalizedAdjacency& norm,
                                           const std::vector<double>& grad_edge_value,
                                           const std::vector<double>& grad_diag_value,
                                           const std::vector<double>& raw_weights,
                                           double self_loop, bool weighted_degrees) {
    const int n = g.num_nodes();
    std::vector<double> grad_w(g.num_edges(), 0.0);

    // Direct term: normalized value = w * c_u * c_v.
    for (int e = 0; e < g.num_edges(); ++e) {
        const int u = g.edge_user[e];
        const int v = g.num_users + g.edge_item[e];
        grad_w[e] += grad_edge_value[e] * norm.inv_sqrt_deg[u] * norm.inv_sqrt_deg[v];
    }
    if (!weighted_degrees) return grad_w;

    // Degree term: d(c_m)/d(deg_m) = -0.5 * deg^{-3/2}; every incident raw
    // entry feeds deg_m with unit weight. Both the (u,v) and (v,u) normalized
    // entries carry the same grad_edge_value here because spmm applies each
    // stored edge symmetrically.
    std::vector<double> grad_c(n, 0.0);
    for (int e = 0; e < g.num_edges(); ++e) {
        const int u = g.edge_user[e];
        const int v = g.num_users + g.edge_item[e];
        const double w = raw_weights[e];
        grad_c[u] += grad_edge_value[e] * w * norm.inv_sqrt_deg[v];
        grad_c[v] += grad_edge_value[e] * w * norm.inv_sqrt_deg[u];
    }
    for (int node = 0; node < n; ++node)
        grad_c[node] += grad_diag_value[node] * self_loop * 2.0 * norm.inv_sqrt_deg[node];

    std::vector<double> grad_deg(n, 0.0);
    for (int node = 0; node < n; ++node) {
        if (norm.degree[node] <= 0.0) continue;
        grad_deg[node] = grad_c[node] * (-0.5) * norm.inv_sqrt_deg[node] / norm.degree[node];
    }
    for (int e = 0; e < g.num_edges(); ++e)
        grad_w[e] += grad_deg[g.edge_user[e]] + grad_deg[g.num_users + g.edge_item[e]];
    return grad_w;
}

// Adjoint of the per-user softmax over ELU-activated logits.
void tpw_backward(const BehaviorGraph& g, const Matrix& embeddings0, const Matrix& weigher,
                  const std::vector<double>& logits, const EdgeWeightMap& weights,
                  const std::vector<double>& grad_w, Matrix& grad_emb, Matrix& grad_beta) {
    const std::size_t d = embeddings0.cols();
    for (int u = 0; u < g.num_users; ++u) {
        const int begin = g.user_offsets[u];
        const int end = g.user_offsets[u + 1];
        if (begin == end) continue;
        double weighted_sum = 0.0;
        for (int e = begin; e < end; ++e) weighted_sum += grad_w[e] * weights[e];
        for (int e = begin; e < end; ++e) {
            const double grad_h = weights[e] * (grad_w[e] - weighted_sum);
            if (grad_h == 0.0) continue;
            const double grad_z = grad_h * elu_grad(logits[e]);
            const int item_node = g.num_users + g.edge_item[e];
            auto user_row = embeddings0.row(u);
            auto item_row = embeddings0.row(item_node);
            auto grad_user = grad_emb.row(u);
            auto grad_item = grad_emb.row(item_node);
            auto beta = weigher.row(0);
            auto g_beta = grad_beta.row(0);
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = user_row[c] - item_row[c];
                g_beta[c] += grad_z * std::abs(diff);
                const double slope = grad_z * beta[c] * sign(diff);
                grad_user[c] += slope;
                grad_item[c] -= slope;
            }
        }
    }
}

} // namespace

Gradients backward(const ModelParams& params, const std::vector<BehaviorGraph>& graphs,
                   const ForwardOptions& options, const ForwardResult& cache,
                   const LossAdjoints& adjoints) {
    const int R = params.num_behaviors;
    const int n = params.num_nodes();
    const std::size_t d = static_cast<std::size_t>(params.dim);
    Gradients grads = Gradients::zeros_like(params);

    // Merge is a behavior-wise sum, so dL/d(fused_r) equals dL/d(merged).
    const Matrix& grad_merged = adjoints.merged;

    // Attention backward. Residual passes the adjoint straight through; the
    // mixed term distributes it over values, scores, and projections.
    std::vector<Matrix> grad_final(R);
    for (int r = 0; r < R; ++r) grad_final[r] = grad_merged;

    // The merged adjoint is shared by every behavior's attention output, so
    // the per-projection adjoints can be accumulated across the behavior
    // axis first and each d x d outer product runs once per (node, r).
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> gv_dot(R), alpha_col_sum(R);
    Matrix grad_q(R, d), grad_k(R, d);
    for (int node = 0; node < n; ++node) {
        bool nonzero = false;
        auto g_out = grad_merged.row(node);
        for (std::size_t c = 0; c < d && !nonzero; ++c) nonzero = g_out[c] != 0.0;
        if (!nonzero) continue;

        const double* alpha =
            &cache.attn_alpha[static_cast<std::size_t>(node) * R * R];
        for (int r2 = 0; r2 < R; ++r2) {
            gv_dot[r2] = dot(g_out, cache.behavior[r2].attn_v.row(node));
            alpha_col_sum[r2] = 0.0;
        }
        grad_q.fill(0.0);
        grad_k.fill(0.0);
        for (int r = 0; r < R; ++r) {
            const double* alpha_row = alpha + static_cast<std::size_t>(r) * R;
            double mixed = 0.0;
            for (int r2 = 0; r2 < R; ++r2) {
                alpha_col_sum[r2] += alpha_row[r2];
                mixed += gv_dot[r2] * alpha_row[r2];
            }
            auto q_row = cache.behavior[r].attn_q.row(node);
            auto gq_row = grad_q.row(r);
            for (int r2 = 0; r2 < R; ++r2) {
                const double gs = alpha_row[r2] * (gv_dot[r2] - mixed) * inv_sqrt_d;
                if (gs == 0.0) continue;
                auto k_row = cache.behavior[r2].attn_k.row(node);
                auto gk_row = grad_k.row(r2);
                for (std::size_t c = 0; c < d; ++c) {
                    gq_row[c] += gs * k_row[c];
                    gk_row[c] += gs * q_row[c];
                }
            }
        }
        for (int r = 0; r < R; ++r) {
            auto final_row = cache.behavior[r].layer.back().row(node);
            auto grad_final_row = grad_final[r].row(node);
            auto gq_row = grad_q.row(r);
            auto gk_row = grad_k.row(r);
            const double gv_scale = alpha_col_sum[r];
            for (std::size_t c0 = 0; c0 < d; ++c0) {
                const double f = final_row[c0];
                double acc = 0.0;
                for (std::size_t c1 = 0; c1 < d; ++c1) {
                    grads.attn_query(c0, c1) += f * gq_row[c1];
                    grads.attn_key(c0, c1) += f * gk_row[c1];
                    grads.attn_value(c0, c1) += f * gv_scale * g_out[c1];
                    acc += params.attn_query(c0, c1) * gq_row[c1] +
                           params.attn_key(c0, c1) * gk_row[c1] +
                           params.attn_value(c0, c1) * gv_scale * g_out[c1];
                }
                grad_final_row[c0] += acc;
            }
        }
    }

    // Per-behavior: propagation backward, then normalization and weigher.
    for (int r = 0; r < R; ++r) {
        const auto& bf = cache.behavior[r];
        const BehaviorGraph& g = graphs[r];
        const bool dropout = !bf.drop_scale.empty();

        std::vector<double> grad_edge_value(g.num_edges(), 0.0);
        std::vector<double> grad_diag_value(n, 0.0);

        Matrix grad_layer = std::move(grad_final[r]);
        Matrix grad_prev;
        for (int l = options.layers; l >= 1; --l) {
            if (dropout) {
                auto& scale = bf.drop_scale[l - 1];
                for (std::size_t idx = 0; idx < grad_layer.values().size(); ++idx)
                    grad_layer.values()[idx] *= scale.values()[idx];
            }
            const Matrix& input = bf.layer[l - 1];
            // Diagonal entries: d(out[m]) / d(diag_m) = input[m].
            for (int node = 0; node < n; ++node)
                grad_diag_value[node] += dot(grad_layer.row(node), input.row(node));
            // Off-diagonal entries contribute through both stored directions.
            for (int e = 0; e < g.num_edges(); ++e) {
                const int u = g.edge_user[e];
                const int v = g.num_users + g.edge_item[e];
                grad_edge_value[e] += dot(grad_layer.row(u), input.row(v)) +
                                      dot(grad_layer.row(v), input.row(u));
            }
            spmm(bf.norm, grad_layer, grad_prev);  // adjacency is symmetric
            std::swap(grad_layer, grad_prev);
        }
        grads.embeddings[r].add_scaled(grad_layer, 1.0);

        if (options.variant != Variant::no_tpw) {
            std::vector<double> grad_w =
                normalization_backward(g, bf.norm, grad_edge_value, grad_diag_value, bf.tpw,
                                       options.self_loop,
                                       options.degree_mode == DegreeMode::weighted);
            if (r < static_cast<int>(adjoints.tpw.size()) && !adjoints.tpw[r].empty()) {
                if (adjoints.tpw[r].size() != grad_w.size())
                    throw Error("consistency", "tpw adjoint size mismatch");
                for (std::size_t e = 0; e < grad_w.size(); ++e) grad_w[e] += adjoints.tpw[r][e];
            }
            tpw_backward(g, params.embeddings[r], params.weigher[r], bf.tpw_logits, bf.tpw,
                         grad_w, grads.embeddings[r], grads.weigher[r]);
        }

        if (r < static_cast<int>(adjoints.apv.size()) && !adjoints.apv[r].empty()) {
            const auto& grad_apv = adjoints.apv[r];
            if (grad_apv.size() != static_cast<std::size_t>(g.num_edges()))
                throw Error("consistency", "apv adjoint size mismatch");
            for (int e = 0; e < g.num_edges(); ++e) {
                const double ga = grad_apv[e];
                if (ga == 0.0) continue;
                const int u = g.edge_user[e];
                const int v = g.num_users + g.edge_item[e];
                auto user_row = params.embeddings[r].row(u);
                auto item_row = params.embeddings[r].row(v);
                auto grad_user = grads.embeddings[r].row(u);
                auto grad_item = grads.embeddings[r].row(v);
                for (std::size_t c = 0; c < d; ++c) {
                    const double slope = ga * 2.0 * (user_row[c] - item_row[c]);
                    grad_user[c] += slope;
                    grad_item[c] -= slope;
                }
            }
        }
    }
    return grads;
}

} // namespace swgcn
