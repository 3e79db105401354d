#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "swgcn/data.hpp"
#include "swgcn/error.hpp"
#include "swgcn/evaluation.hpp"
#include "swgcn/training.hpp"

using namespace swgcn;

namespace {

// Fused embeddings with d = 1 so item scores equal the given values.
FusedEmbeddings fused_from_scores(const std::vector<double>& scores) {
    Matrix merged(1 + scores.size(), 1);
    merged(0, 0) = 1.0;
    for (std::size_t i = 0; i < scores.size(); ++i) merged(1 + i, 0) = scores[i];
    return {merged, 1};
}

SplitDataset planted_split(int users, int items, std::uint64_t seed, double synergy = 0.9) {
    SyntheticConfig config;
    config.num_users = users;
    config.num_items = items;
    config.num_behaviors = 2;
    config.interactions_per_behavior = {users * 12LL, users * 5LL};
    config.synergy_strength = synergy;
    config.seed = seed;
    const auto data = generate_synthetic(config);
    return temporal_split(preprocess(data.records, 2, 0));
}

} // namespace

TEST_CASE("rank_and_score orders by score then index") {
    const auto fused = fused_from_scores({0.1, 0.9, 0.5});
    CHECK(rank_and_score(fused, 0, 3, {}) == std::vector<int>{1, 2, 0});
    const auto tied = fused_from_scores({0.5, 0.5});
    CHECK(rank_and_score(tied, 0, 2, {}) == std::vector<int>{0, 1});
}

TEST_CASE("rank_and_score respects the mask") {
    const auto fused = fused_from_scores({0.9, 0.8, 0.7, 0.6});
    CHECK(rank_and_score(fused, 0, 4, {0, 2}) == std::vector<int>{1, 3});
}

TEST_CASE("rank_and_score matches the exhaustive sort oracle") {
    Rng rng(31);
    std::vector<double> scores(30);
    for (auto& s : scores) s = rng.normal();
    scores[4] = scores[9];  // force one tie
    const auto fused = fused_from_scores(scores);
    const std::vector<int> mask{2, 11, 17};
    const auto ranked = rank_and_score(fused, 0, 30, mask);
    const auto expected = oracle::full_sort_ranking(scores, mask);
    CHECK(ranked == expected);
}

TEST_CASE("hr and ndcg follow the rank of the truth item") {
    const std::vector<int> ranked{5, 3, 8, 1, 9, 0, 2, 4, 7, 6, 11, 10};
    CHECK(hr_at_k(ranked, 5, 1) == 1.0);
    CHECK(hr_at_k(ranked, 5, 10) == 1.0);
    CHECK(ndcg_at_k(ranked, 5, 1) == doctest::Approx(1.0));
    CHECK(hr_at_k(ranked, 11, 10) == 0.0);   // rank 11
    CHECK(ndcg_at_k(ranked, 11, 10) == 0.0);
    CHECK(ndcg_at_k(ranked, 8, 3) == doctest::Approx(0.5));  // rank 3 -> 1/log2(4)
    CHECK_THROWS_AS(hr_at_k(ranked, 5, 0), Error);
}

TEST_CASE("metrics match counting oracles on a synthetic cohort") {
    const int users = 50, items = 60;
    Rng rng(17);
    Matrix merged(users + items, 8);
    for (auto& v : merged.values()) v = rng.normal();
    const FusedEmbeddings fused{merged, users};

    std::vector<int> truths(users);
    std::vector<std::vector<int>> ranked_lists(users);
    for (int u = 0; u < users; ++u) {
        truths[u] = rng.uniform_index(items);
        std::vector<double> scores(items);
        for (int i = 0; i < items; ++i) scores[i] = predict(fused, u, i);
        ranked_lists[u] = oracle::full_sort_ranking(scores, {});
    }

    for (int k : {1, 5, 10}) {
        double hr = 0.0, ndcg = 0.0;
        for (int u = 0; u < users; ++u) {
            const auto ranked = rank_and_score(fused, u, items, {});
            hr += hr_at_k(ranked, truths[u], k);
            ndcg += ndcg_at_k(ranked, truths[u], k);
        }
        hr /= users;
        ndcg /= users;
        CHECK(hr == doctest::Approx(oracle::counting_hr(ranked_lists, truths, k)));
        CHECK(std::abs(ndcg - oracle::scalar_ndcg(ranked_lists, truths, k)) <= 1e-12);
        CHECK(ndcg <= hr + 1e-12);
    }
}

TEST_CASE("evaluate_fused on an untrained model matches uniform-rank statistics") {
    const auto split = planted_split(400, 100, 5);
    const auto params = init_params(400, 100, 8, 2, 1234);
    const auto graphs = build_behavior_graphs(split.train);
    ForwardOptions options;
    options.layers = 2;
    const auto fwd = forward(params, graphs, options);

    // Truths drawn independently of the graph and parameters, so each truth's
    // rank under the untrained scores is uniform on 1..N_i.
    Rng rng(99);
    std::vector<int> truths(split.train.num_users);
    for (auto& t : truths) t = rng.uniform_index(100);

    EvalConfig config;
    config.k_list = {10};
    config.mask_train = false;
    const auto report = evaluate_fused(fwd.fused, split, truths, config);
    const double expected = 10.0 / 100.0;
    const double sigma = std::sqrt(expected * (1.0 - expected) / report.num_eval_users);
    CHECK(std::abs(report.hr[0] - expected) <= 3.0 * sigma);
}

TEST_CASE("evaluate_fused with oracle embeddings is perfect") {
    const int users = 12, items = 9;
    SplitDataset split;
    split.train.num_users = users;
    split.train.num_items = items;
    split.train.num_behaviors = 1;
    split.train.edges.resize(1);
    split.val_item.assign(users, -1);
    split.test_item.assign(users, -1);
    Matrix merged(users + items, items);
    Rng rng(3);
    for (int i = 0; i < items; ++i) merged(users + i, i) = 1.0;
    for (int u = 0; u < users; ++u) {
        const int truth = rng.uniform_index(items);
        split.test_item[u] = truth;
        split.eval_users.push_back(u);
        merged(u, truth) = 1.0;
    }
    EvalConfig config;
    config.k_list = {1, 5};
    config.mask_train = false;
    const auto report = evaluate_fused({merged, users}, split, split.test_item, config);
    for (double v : report.hr) CHECK(v == doctest::Approx(1.0));
    for (double v : report.ndcg) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("evaluate is deterministic, monotone in K, and thread-invariant") {
    const auto split = planted_split(60, 50, 9);
    const auto params = init_params(60, 50, 8, 2, 77);
    ForwardOptions options;
    options.layers = 2;
    EvalConfig config;
    config.k_list = {1, 5, 10, 20};
    const auto a = evaluate(params, split, options, config);
    const auto b = evaluate(params, split, options, config);
    CHECK(a.hr == b.hr);
    CHECK(a.ndcg == b.ndcg);
    for (std::size_t i = 1; i < a.hr.size(); ++i) {
        CHECK(a.hr[i] >= a.hr[i - 1]);
        CHECK(a.ndcg[i] >= a.ndcg[i - 1]);
    }
    for (std::size_t i = 0; i < a.hr.size(); ++i) CHECK(a.ndcg[i] <= a.hr[i] + 1e-12);

    EvalConfig threaded = config;
    threaded.num_threads = 2;
    const auto graphs = build_behavior_graphs(split.train);
    const auto fwd = forward(params, graphs, options);
    const auto serial = evaluate_fused(fwd.fused, split, split.test_item, config);
    const auto parallel = evaluate_fused(fwd.fused, split, split.test_item, threaded);
    CHECK(serial.hr == parallel.hr);
    CHECK(serial.ndcg == parallel.ndcg);
}

TEST_CASE("evaluate_fused masks training positives out of the candidate list") {
    const auto split = planted_split(30, 40, 13);
    const auto params = init_params(30, 40, 6, 2, 5);
    const auto graphs = build_behavior_graphs(split.train);
    ForwardOptions options;
    options.layers = 1;
    const auto fwd = forward(params, graphs, options);

    std::vector<std::vector<int>> positives(split.train.num_users);
    for (const Edge& e : split.train.edges[1]) positives[e.user].push_back(e.item);
    for (int u : split.eval_users) {
        const auto ranked = rank_and_score(fwd.fused, u, split.train.num_items, positives[u]);
        for (int item : positives[u])
            CHECK(std::find(ranked.begin(), ranked.end(), item) == ranked.end());
    }
}

TEST_CASE("evaluate_fused without eval users reports an error") {
    SplitDataset split;
    split.train.num_users = 2;
    split.train.num_items = 2;
    split.train.num_behaviors = 1;
    split.train.edges.resize(1);
    split.val_item.assign(2, -1);
    split.test_item.assign(2, -1);
    Matrix merged(4, 2);
    EvalConfig config;
    CHECK_THROWS_AS(evaluate_fused({merged, 2}, split, split.test_item, config), Error);
}

TEST_CASE("synergy_report partitions items into disjoint covering cells") {
    const auto split = planted_split(25, 30, 21);
    const auto& ds = split.train;
    const auto params = init_params(ds.num_users, ds.num_items, 6, ds.num_behaviors, 9);

    std::vector<int> users;
    for (int u = 0; u < 5; ++u) users.push_back(u);
    const auto cells = synergy_report(params, ds, users);

    for (int u : users) {
        std::set<unsigned> masks;
        int covered = 0;
        for (const auto& cell : cells) {
            if (cell.user != u) continue;
            CHECK(masks.insert(cell.behavior_mask).second);  // disjoint
            covered += cell.item_count;
            CHECK(cell.behavior_mask != 0);
        }
        std::set<int> interacted;
        for (int r = 0; r < ds.num_behaviors; ++r)
            for (const Edge& e : ds.edges[r])
                if (e.user == u) interacted.insert(e.item);
        CHECK(covered == static_cast<int>(interacted.size()));
    }
    CHECK_THROWS_AS(synergy_report(params, ds, {9999}), Error);
}

TEST_CASE("synergy_report degenerate user with target-only items") {
    InteractionDataset ds;
    ds.num_users = 1;
    ds.num_items = 2;
    ds.num_behaviors = 2;
    ds.edges.resize(2);
    ds.edges[1] = {{0, 0, 1}, {0, 1, 2}};
    const auto params = init_params(1, 2, 4, 2, 3);
    const auto cells = synergy_report(params, ds, {0});
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].behavior_mask == 2u);
    CHECK(cells[0].item_count == 2);
}

TEST_CASE("behavior_mask_label joins active behaviors") {
    const std::vector<std::string> vocab{"view", "cart", "buy"};
    CHECK(behavior_mask_label(0b101, vocab) == "view+buy");
    CHECK(behavior_mask_label(0b010, vocab) == "cart");
    CHECK(behavior_mask_label(0, vocab) == "none");
}

TEST_CASE("trained weigher favors co-occurring items on planted data") {
    // Mirrors the case-study finding: cells holding items with both auxiliary
    // and target interactions outweigh auxiliary-only cells for most users.
    const auto split = planted_split(120, 80, 51, 0.95);
    TrainConfig config;
    config.dim = 16;
    config.layers = 2;
    config.batch_size = 256;
    config.neg_samples = 4;
    config.learning_rate = 0.05;
    config.max_epochs = 30;
    config.patience = 30;
    config.seed = 4;
    const auto result = fit(split, config);

    std::vector<int> users(split.train.num_users);
    for (int u = 0; u < split.train.num_users; ++u) users[u] = u;
    const auto cells = synergy_report(result.best_params, split.train, users);

    int favors = 0, comparable = 0;
    for (int u = 0; u < split.train.num_users; ++u) {
        double aux_only = -1.0, both = -1.0;
        for (const auto& cell : cells) {
            if (cell.user != u) continue;
            if (cell.behavior_mask == 0b01) aux_only = cell.mean_weight;
            if (cell.behavior_mask == 0b11) both = cell.mean_weight;
        }
        if (aux_only < 0.0 || both < 0.0) continue;
        ++comparable;
        if (both > aux_only) ++favors;
    }
    REQUIRE(comparable > 40);
    CHECK(favors * 2 > comparable);  // majority of users
}
