#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "swgcn/data.hpp"
#include "swgcn/model.hpp"
#include "swgcn/rng.hpp"

namespace swgcn {

struct TrainConfig {
    double lambda_a = 0.5;       // alignment weight in the joint objective
    double lambda_s = 0.5;       // self-loop weight
    double gamma1 = 1e-5;        // alignment-score regularizer
    double gamma2 = 1e-5;        // parameter weight decay
    double learning_rate = 1e-3;
    int batch_size = 2048;
    int neg_samples = 4;
    int layers = 3;
    int dim = 32;
    double p_message = 0.0;
    int patience = 50;
    int max_epochs = 500;
    std::uint64_t seed = 1;
    Variant variant = Variant::base;
    SatMode sat_mode = SatMode::squared;
    DegreeMode degree_mode = DegreeMode::weighted;
    bool mask_train = true;      // masks training positives when ranking validation items

    void validate() const;
    ForwardOptions forward_options(bool training) const;
};

// Alignment loss between weigher maps and preference scores over the given
// behaviors. mode signed_diff uses (w - w~) per edge, squared uses (w - w~)^2;
// the gamma1 term penalizes squared preference scores over observed edges.
// Optional outputs receive d(loss)/d(tpw) and d(loss)/d(apv) per edge.
double sat_loss(const std::vector<EdgeWeightMap>& tpw_maps,
                const std::vector<EdgeWeightMap>& apv_maps,
                double gamma1, const std::vector<int>& behaviors, SatMode mode,
                std::vector<std::vector<double>>* grad_tpw = nullptr,
                std::vector<std::vector<double>>* grad_apv = nullptr);

// Pairwise ranking loss: sum of -ln sigmoid(pos - neg) over aligned score
// pairs plus gamma2 * ||params||^2.
double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores,
                const ModelParams& params, double gamma2);

double joint_loss(double sat, double bpr, double lambda_a, Variant variant = Variant::base);

// Uniform negatives with rejection against the user's positive set.
std::vector<int> sample_negatives(int user, const std::vector<int>& positive_items,
                                  int num_items, int count, Rng& rng);

// Graphs plus positive-edge bookkeeping shared by the epoch loop.
struct TrainContext {
    std::vector<BehaviorGraph> graphs;
    std::vector<std::vector<int>> user_positives;    // sorted target train items per user
    std::vector<std::pair<int, int>> positive_edges; // (user, item) target train edges
    int num_users = 0;
    int num_items = 0;
};

TrainContext make_train_context(const SplitDataset& split);

struct TrainState {
    int epoch = 0;
    double best_val_hr = -1.0;
    int epochs_since_improvement = 0;
    long long adam_step = 0;
    Gradients adam_m, adam_v;
    Rng rng{1};

    static TrainState init(const ModelParams& params, std::uint64_t seed);
};

struct EpochStats {
    double sat = 0.0;
    double bpr = 0.0;
    double joint = 0.0;
};

// One pass over shuffled positive edges in minibatches: forward, joint loss,
// manual backprop, Adam update (0.9 / 0.999, eps 1e-8, bias-corrected).
EpochStats train_epoch(ModelParams& params, TrainState& state, const TrainContext& ctx,
                       const TrainConfig& config);

struct EpochRecord {
    int epoch = 0;
    double sat = 0.0;
    double bpr = 0.0;
    double joint = 0.0;
    double val_hr10 = 0.0;
    double val_ndcg10 = 0.0;
    double wall_ms = 0.0;   // informational; excluded from determinism comparisons
};

struct FitResult {
    ModelParams best_params;
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_hr10 = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&, const ModelParams&)>;

// Trains with per-epoch validation HR@10 early stopping; returns the
// parameters snapshotted at the best validation epoch. The callback (if any)
// fires after every epoch, e.g. for periodic checkpoints.
FitResult fit(const SplitDataset& split, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

// Compares analytic gradients of the joint loss against central finite
// differences over every parameter tensor on a tiny instance. Returns the
// max relative error max(|ga - gn| / (|ga| + |gn| + 1e-12)).
double gradient_check(const SplitDataset& split, const TrainConfig& config,
                      std::uint64_t param_seed = 7, double step = 1e-5);

double gradient_check_params(const SplitDataset& split, const TrainConfig& config,
                             ModelParams params, double step = 1e-5);

} // namespace swgcn
