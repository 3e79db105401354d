#include "swgcn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "swgcn/error.hpp"
#include "swgcn/evaluation.hpp"

namespace swgcn {

namespace {

// -ln sigmoid(x), computed without overflow on either tail.
double softplus_neg(double x) {
    return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

} // namespace

void TrainConfig::validate() const {
    if (lambda_a < 0.0 || lambda_a > 1.0) throw Error("config", "lambda_a must lie in [0, 1]");
    if (lambda_s < 0.0) throw Error("config", "lambda_s must be non-negative");
    if (gamma1 < 0.0 || gamma2 < 0.0) throw Error("config", "regularizers must be non-negative");
    if (learning_rate < 0.0) throw Error("config", "learning rate must be non-negative");
    if (batch_size <= 0 || neg_samples <= 0 || layers <= 0 || dim <= 0)
        throw Error("config", "batch size, negatives, layers, and dim must be positive");
    if (p_message < 0.0 || p_message >= 1.0) throw Error("config", "p_message must lie in [0, 1)");
    if (patience <= 0 || max_epochs <= 0)
        throw Error("config", "patience and max_epochs must be positive");
}

ForwardOptions TrainConfig::forward_options(bool training) const {
    ForwardOptions opt;
    opt.self_loop = lambda_s;
    opt.layers = layers;
    opt.p_message = p_message;
    opt.training = training;
    opt.variant = variant;
    opt.degree_mode = degree_mode;
    return opt;
}

double sat_loss(const std::vector<EdgeWeightMap>& tpw_maps,
                const std::vector<EdgeWeightMap>& apv_maps,
                double gamma1, const std::vector<int>& behaviors, SatMode mode,
                std::vector<std::vector<double>>* grad_tpw,
                std::vector<std::vector<double>>* grad_apv) {
    if (grad_tpw) {
        grad_tpw->assign(tpw_maps.size(), {});
        for (std::size_t r = 0; r < tpw_maps.size(); ++r)
            (*grad_tpw)[r].assign(tpw_maps[r].size(), 0.0);
    }
    if (grad_apv) {
        grad_apv->assign(apv_maps.size(), {});
        for (std::size_t r = 0; r < apv_maps.size(); ++r)
            (*grad_apv)[r].assign(apv_maps[r].size(), 0.0);
    }
    if (behaviors.empty()) return 0.0;

    const double inv_r = 1.0 / static_cast<double>(behaviors.size());
    double total = 0.0;
    for (int r : behaviors) {
        if (r < 0 || r >= static_cast<int>(tpw_maps.size()) ||
            r >= static_cast<int>(apv_maps.size()))
            throw Error("consistency", "alignment behavior out of range");
        const auto& w = tpw_maps[r];
        const auto& w_hat = apv_maps[r];
        if (w.size() != w_hat.size())
            throw Error("consistency", "weigher and preference maps cover different edge sets");
        if (w.empty()) continue;

        const double inv_n = 1.0 / static_cast<double>(w.size());
        double align = 0.0, reg = 0.0;
        for (std::size_t e = 0; e < w.size(); ++e) {
            const double diff = w[e] - w_hat[e];
            if (mode == SatMode::signed_diff) {
                align += diff;
                if (grad_tpw) (*grad_tpw)[r][e] += inv_r * inv_n;
                if (grad_apv) (*grad_apv)[r][e] -= inv_r * inv_n;
            } else {
                align += diff * diff;
                if (grad_tpw) (*grad_tpw)[r][e] += inv_r * inv_n * 2.0 * diff;
                if (grad_apv) (*grad_apv)[r][e] -= inv_r * inv_n * 2.0 * diff;
            }
            reg += w_hat[e] * w_hat[e];
            if (grad_apv) (*grad_apv)[r][e] += inv_r * gamma1 * 2.0 * w_hat[e];
        }
        total += inv_r * (inv_n * align + gamma1 * reg);
    }
    return total;
}

double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores,
                const ModelParams& params, double gamma2) {
    if (pos_scores.size() != neg_scores.size())
        throw Error("consistency", "positive and negative score lists differ in length");
    double total = 0.0;
    for (std::size_t t = 0; t < pos_scores.size(); ++t)
        total += softplus_neg(pos_scores[t] - neg_scores[t]);
    return total + gamma2 * params.squared_norm();
}

double joint_loss(double sat, double bpr, double lambda_a, Variant variant) {
    if (lambda_a < 0.0 || lambda_a > 1.0) throw Error("config", "lambda_a must lie in [0, 1]");
    if (variant == Variant::no_sat || variant == Variant::no_tpw) return bpr;
    return lambda_a * sat + (1.0 - lambda_a) * bpr;
}

std::vector<int> sample_negatives(int user, const std::vector<int>& positive_items,
                                  int num_items, int count, Rng& rng) {
    if (static_cast<int>(positive_items.size()) >= num_items)
        throw Error("sampling", "user " + std::to_string(user) + " interacted with every item");
    std::vector<int> negatives;
    negatives.reserve(count);
    while (static_cast<int>(negatives.size()) < count) {
        const int candidate = rng.uniform_index(num_items);
        if (std::binary_search(positive_items.begin(), positive_items.end(), candidate)) continue;
        negatives.push_back(candidate);
    }
    return negatives;
}

TrainContext make_train_context(const SplitDataset& split) {
    TrainContext ctx;
    ctx.graphs = build_behavior_graphs(split.train);
    ctx.num_users = split.train.num_users;
    ctx.num_items = split.train.num_items;
    ctx.user_positives.resize(ctx.num_users);
    const auto& target_edges = split.train.edges[split.train.target_behavior()];
    ctx.positive_edges.reserve(target_edges.size());
    for (const Edge& e : target_edges) {
        ctx.user_positives[e.user].push_back(e.item);
        ctx.positive_edges.emplace_back(e.user, e.item);
    }
    for (auto& items : ctx.user_positives) std::sort(items.begin(), items.end());
    return ctx;
}

TrainState TrainState::init(const ModelParams& params, std::uint64_t seed) {
    TrainState state;
    state.adam_m = Gradients::zeros_like(params);
    state.adam_v = Gradients::zeros_like(params);
    state.rng = Rng(seed);
    return state;
}

namespace {

struct Triple {
    int user, pos, neg;
};

struct BatchLoss {
    double sat = 0.0;
    double bpr = 0.0;
    double joint = 0.0;
};

// Joint loss on a fixed triple set plus the adjoints feeding backward().
BatchLoss batch_loss_and_adjoints(const ModelParams& params, const ForwardResult& cache,
                                  std::span<const Triple> triples, const TrainConfig& config,
                                  LossAdjoints* adjoints) {
    const int R = params.num_behaviors;
    const auto aligned = sat_behaviors(config.variant, R);
    const bool bpr_only = config.variant == Variant::no_sat || config.variant == Variant::no_tpw;
    const double sat_scale = bpr_only ? 0.0 : config.lambda_a;
    const double bpr_scale = bpr_only ? 1.0 : 1.0 - config.lambda_a;

    BatchLoss out;
    std::vector<std::vector<double>> grad_tpw, grad_apv;
    if (!aligned.empty()) {
        std::vector<EdgeWeightMap> tpw(R), apv(R);
        for (int r = 0; r < R; ++r) {
            tpw[r] = cache.behavior[r].tpw;
            apv[r] = cache.behavior[r].apv;
        }
        out.sat = sat_loss(tpw, apv, config.gamma1, aligned, config.sat_mode,
                           adjoints ? &grad_tpw : nullptr, adjoints ? &grad_apv : nullptr);
    }

    const int num_users = params.num_users;
    if (adjoints) {
        adjoints->merged = Matrix(cache.fused.merged.rows(), cache.fused.merged.cols());
        adjoints->tpw.assign(R, {});
        adjoints->apv.assign(R, {});
    }
    // The pairwise term is averaged over triples here so the two joint-loss
    // components share a scale and lambda_a keeps its leverage regardless of
    // batch size; bpr_loss() stays the plain sum.
    const double inv_triples = triples.empty() ? 0.0 : 1.0 / static_cast<double>(triples.size());
    double bpr_sum = 0.0;
    for (const Triple& t : triples) {
        const auto user_row = cache.fused.user(t.user);
        const auto pos_row = cache.fused.item(t.pos);
        const auto neg_row = cache.fused.item(t.neg);
        const double x = dot(user_row, pos_row) - dot(user_row, neg_row);
        bpr_sum += softplus_neg(x);
        if (!adjoints) continue;
        const double coeff = (sigmoid(x) - 1.0) * bpr_scale * inv_triples;
        auto g_user = adjoints->merged.row(t.user);
        auto g_pos = adjoints->merged.row(num_users + t.pos);
        auto g_neg = adjoints->merged.row(num_users + t.neg);
        for (std::size_t c = 0; c < user_row.size(); ++c) {
            g_user[c] += coeff * (pos_row[c] - neg_row[c]);
            g_pos[c] += coeff * user_row[c];
            g_neg[c] -= coeff * user_row[c];
        }
    }
    out.bpr = bpr_sum * inv_triples + config.gamma2 * params.squared_norm();
    out.joint = joint_loss(out.sat, out.bpr, config.lambda_a, config.variant);

    if (adjoints && sat_scale != 0.0) {
        for (int r : aligned) {
            adjoints->tpw[r] = std::move(grad_tpw[r]);
            adjoints->apv[r] = std::move(grad_apv[r]);
            for (double& v : adjoints->tpw[r]) v *= sat_scale;
            for (double& v : adjoints->apv[r]) v *= sat_scale;
        }
    }
    return out;
}

void add_weight_decay(Gradients& grads, const ModelParams& params, double gamma2,
                      double bpr_scale) {
    if (gamma2 == 0.0 || bpr_scale == 0.0) return;
    const double factor = 2.0 * gamma2 * bpr_scale;
    auto grad_tensors = grads.tensors();
    auto param_tensors = params.tensors();
    for (std::size_t t = 0; t < grad_tensors.size(); ++t) {
        auto& g = grad_tensors[t].second->values();
        const auto& p = param_tensors[t].second->values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * p[i];
    }
}

void adam_update(ModelParams& params, TrainState& state, Gradients& grads, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    state.adam_step += 1;
    const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.adam_step));
    const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.adam_step));

    auto params_t = params.tensors();
    auto grads_t = grads.tensors();
    auto m_t = state.adam_m.tensors();
    auto v_t = state.adam_v.tensors();
    for (std::size_t t = 0; t < params_t.size(); ++t) {
        auto& p = params_t[t].second->values();
        const auto& g = grads_t[t].second->values();
        auto& m = m_t[t].second->values();
        auto& v = v_t[t].second->values();
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

} // namespace

EpochStats train_epoch(ModelParams& params, TrainState& state, const TrainContext& ctx,
                       const TrainConfig& config) {
    config.validate();
    if (ctx.positive_edges.empty()) throw Error("data", "no target training edges");

    std::vector<int> order(ctx.positive_edges.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    state.rng.shuffle(order);

    const bool bpr_only = config.variant == Variant::no_sat || config.variant == Variant::no_tpw;
    const double bpr_scale = bpr_only ? 1.0 : 1.0 - config.lambda_a;

    EpochStats stats;
    int batches = 0;
    std::vector<Triple> triples;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        triples.clear();
        for (std::size_t i = start; i < end; ++i) {
            const auto [u, pos] = ctx.positive_edges[order[i]];
            for (int neg : sample_negatives(u, ctx.user_positives[u], ctx.num_items,
                                            config.neg_samples, state.rng))
                triples.push_back({u, pos, neg});
        }

        auto cache = forward(params, ctx.graphs, config.forward_options(true), &state.rng);
        LossAdjoints adjoints;
        const BatchLoss loss =
            batch_loss_and_adjoints(params, cache, triples, config, &adjoints);
        if (!std::isfinite(loss.joint))
            throw Error("divergence", "non-finite loss at epoch " + std::to_string(state.epoch) +
                                          " batch " + std::to_string(batches));

        Gradients grads = backward(params, ctx.graphs, config.forward_options(true), cache,
                                   adjoints);
        add_weight_decay(grads, params, config.gamma2, bpr_scale);
        adam_update(params, state, grads, config.learning_rate);

        stats.sat += loss.sat;
        stats.bpr += loss.bpr;
        stats.joint += loss.joint;
        ++batches;
    }
    if (batches > 0) {
        stats.sat /= batches;
        stats.bpr /= batches;
        stats.joint /= batches;
    }
    state.epoch += 1;
    return stats;
}

FitResult fit(const SplitDataset& split, const TrainConfig& config,
              const EpochCallback& on_epoch) {
    config.validate();
    if (split.eval_users.empty()) throw Error("split", "no evaluation users");

    TrainContext ctx = make_train_context(split);
    ModelParams params = init_params(ctx.num_users, ctx.num_items, config.dim,
                                     split.train.num_behaviors, config.seed);
    TrainState state = TrainState::init(params, config.seed + 1);

    EvalConfig val_config;
    val_config.k_list = {10};
    val_config.mask_train = config.mask_train;
    val_config.num_threads = resolve_thread_count(0);

    FitResult result;
    result.best_params = params;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const EpochStats stats = train_epoch(params, state, ctx, config);
        const EvalReport val = evaluate_fused(
            forward(params, ctx.graphs, config.forward_options(false)).fused, split,
            split.val_item, val_config);
        const auto t1 = std::chrono::steady_clock::now();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.sat = stats.sat;
        rec.bpr = stats.bpr;
        rec.joint = stats.joint;
        rec.val_hr10 = val.hr[0];
        rec.val_ndcg10 = val.ndcg[0];
        rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec, params);

        if (val.hr[0] > state.best_val_hr) {
            state.best_val_hr = val.hr[0];
            state.epochs_since_improvement = 0;
            result.best_params = params;
            result.best_epoch = epoch;
            result.best_val_hr10 = val.hr[0];
        } else {
            state.epochs_since_improvement += 1;
            if (state.epochs_since_improvement >= config.patience) break;
        }
    }
    return result;
}

double gradient_check(const SplitDataset& split, const TrainConfig& config,
                      std::uint64_t param_seed, double step) {
    return gradient_check_params(split, config,
                                 init_params(split.train.num_users, split.train.num_items,
                                             config.dim, split.train.num_behaviors, param_seed),
                                 step);
}

double gradient_check_params(const SplitDataset& split, const TrainConfig& config,
                             ModelParams params, double step) {
    config.validate();
    if (config.p_message != 0.0)
        throw Error("config", "gradient check requires p_message = 0");

    TrainContext ctx = make_train_context(split);

    // Deterministic triple set: every positive edge with one drawn negative.
    Rng neg_rng(config.seed + 17);
    std::vector<Triple> triples;
    for (const auto& [u, pos] : ctx.positive_edges) {
        const auto negs = sample_negatives(u, ctx.user_positives[u], ctx.num_items, 1, neg_rng);
        triples.push_back({u, pos, negs[0]});
    }

    const ForwardOptions options = config.forward_options(true);
    auto loss_at = [&](const ModelParams& p) {
        auto cache = forward(p, ctx.graphs, options);
        return batch_loss_and_adjoints(p, cache, triples, config, nullptr).joint;
    };

    auto cache = forward(params, ctx.graphs, options);
    LossAdjoints adjoints;
    batch_loss_and_adjoints(params, cache, triples, config, &adjoints);
    Gradients grads = backward(params, ctx.graphs, options, cache, adjoints);
    const bool bpr_only = config.variant == Variant::no_sat || config.variant == Variant::no_tpw;
    add_weight_decay(grads, params, config.gamma2, bpr_only ? 1.0 : 1.0 - config.lambda_a);

    double max_rel_err = 0.0;
    auto param_tensors = params.tensors();
    auto grad_tensors = grads.tensors();
    for (std::size_t t = 0; t < param_tensors.size(); ++t) {
        auto& values = param_tensors[t].second->values();
        const auto& analytic = grad_tensors[t].second->values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = loss_at(params);
            values[i] = saved - step;
            const double down = loss_at(params);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double rel = std::abs(analytic[i] - numeric) /
                               (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
            max_rel_err = std::max(max_rel_err, rel);
        }
    }
    return max_rel_err;
}

} // namespace swgcn
