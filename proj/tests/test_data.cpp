#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <tuple>
#include <sstream>

#include <json.hpp>

#include "swgcn/data.hpp"
#include "swgcn/error.hpp"
#include "swgcn/rng.hpp"

using namespace swgcn;

namespace {

const std::vector<std::string> kVocab{"view", "cart", "buy"};

std::string records_fingerprint(const std::vector<InteractionRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records)
        out << r.user << '|' << r.item << '|' << r.behavior << '|' << r.timestamp << '\n';
    return out.str();
}

} // namespace

TEST_CASE("parse_interactions keeps well-formed lines in order") {
    const std::string text = "u1\ti1\tview\t5\nu2\ti2\tbuy\t9\nu1\ti3\tcart\t7\n";
    const auto records = parse_interactions(text, kVocab);
    REQUIRE(records.size() == 3);
    CHECK(records[0].user == "u1");
    CHECK(records[0].behavior == 0);
    CHECK(records[1].behavior == 2);
    CHECK(records[2].item == "i3");
    CHECK(records[2].timestamp == 7);
}

TEST_CASE("parse_interactions empty input gives empty list") {
    CHECK(parse_interactions("", kVocab).empty());
    CHECK(parse_interactions("\n\n", kVocab).empty());
}

TEST_CASE("parse_interactions rejects bad lines with the line number") {
    CHECK_THROWS_WITH_AS(parse_interactions("u1\ti1\tview\t-3\n", kVocab),
                         doctest::Contains("line 1"), Error);
    try {
        parse_interactions("u1\ti1\tview\t1\nu1\ti1\tunknown\t2\n", kVocab);
        FAIL("expected vocabulary error");
    } catch (const Error& e) {
        CHECK(e.category() == "vocab");
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    try {
        parse_interactions("u1\ti1\tview\n", kVocab);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.category() == "parse");
    }
}

TEST_CASE("preprocess collapses duplicates to the earliest timestamp") {
    std::vector<InteractionRecord> records{
        {"u1", "i1", 0, 5},
        {"u1", "i1", 0, 2},
    };
    const auto ds = preprocess(records, 3, 0);
    REQUIRE(ds.edges[0].size() == 1);
    CHECK(ds.edges[0][0].timestamp == 2);
    CHECK(ds.num_users == 1);
    CHECK(ds.num_items == 1);
}

TEST_CASE("preprocess drops entities below the target threshold") {
    std::vector<InteractionRecord> records;
    // u_keep buys 5 distinct items backed by 5 buying items each; u_drop only 4.
    for (int i = 0; i < 5; ++i)
        for (int u = 0; u < 5; ++u)
            records.push_back({"k" + std::to_string(u), "i" + std::to_string(i), 2,
                               static_cast<std::int64_t>(10 * u + i)});
    for (int i = 0; i < 4; ++i)
        records.push_back({"u_drop", "i" + std::to_string(i), 2, static_cast<std::int64_t>(i)});

    const auto ds = preprocess(records, 3, 5);
    CHECK(ds.user_index.count("u_drop") == 0);
    CHECK(ds.num_users == 5);
    CHECK(ds.num_items == 5);
    for (const auto& [ext, idx] : ds.user_index) CHECK(ext.front() == 'k');
}

TEST_CASE("preprocess errors when everything is filtered") {
    std::vector<InteractionRecord> records{{"u1", "i1", 2, 1}};
    CHECK_THROWS_AS(preprocess(records, 3, 5), Error);
    CHECK_THROWS_AS(preprocess({}, 3, 0), Error);
}

TEST_CASE("preprocess is idempotent and filter-sound") {
    Rng rng(11);
    std::vector<InteractionRecord> records;
    for (int n = 0; n < 400; ++n)
        records.push_back({"u" + std::to_string(rng.uniform_index(20)),
                           "i" + std::to_string(rng.uniform_index(15)),
                           rng.uniform_index(3), static_cast<std::int64_t>(rng.uniform_int(1000))});
    const auto ds = preprocess(records, 3, 2);

    // Every surviving user and item retains >= 2 target edges.
    std::vector<int> user_target(ds.num_users, 0), item_target(ds.num_items, 0);
    for (const Edge& e : ds.edges[2]) {
        user_target[e.user] += 1;
        item_target[e.item] += 1;
    }
    for (int c : user_target) CHECK(c >= 2);
    for (int c : item_target) CHECK(c >= 2);

    // Feeding the preprocessed edges back through preserves the edge set
    // (indices may be assigned differently, external ids may not).
    auto edge_set = [](const InteractionDataset& d) {
        std::set<std::tuple<std::string, std::string, int, std::int64_t>> out;
        for (int r = 0; r < d.num_behaviors; ++r)
            for (const Edge& e : d.edges[r])
                out.insert({d.user_ids[e.user], d.item_ids[e.item], r, e.timestamp});
        return out;
    };
    std::vector<InteractionRecord> round;
    for (int r = 0; r < ds.num_behaviors; ++r)
        for (const Edge& e : ds.edges[r])
            round.push_back({ds.user_ids[e.user], ds.item_ids[e.item], r, e.timestamp});
    const auto ds2 = preprocess(round, 3, 2);
    REQUIRE(ds2.num_users == ds.num_users);
    REQUIRE(ds2.num_items == ds.num_items);
    CHECK(edge_set(ds) == edge_set(ds2));
}

TEST_CASE("temporal_split holds out the last two target interactions") {
    std::vector<InteractionRecord> records{
        {"u1", "a", 2, 1}, {"u1", "b", 2, 2}, {"u1", "c", 2, 3},
        {"u1", "x", 0, 1},
    };
    const auto ds = preprocess(records, 3, 0);
    const auto split = temporal_split(ds);
    const int u = ds.user_index.at("u1");
    REQUIRE(split.eval_users == std::vector<int>{u});
    CHECK(ds.item_ids[split.val_item[u]] == "b");
    CHECK(ds.item_ids[split.test_item[u]] == "c");
    REQUIRE(split.train.edges[2].size() == 1);
    CHECK(ds.item_ids[split.train.edges[2][0].item] == "a");
    CHECK(split.train.edges[0].size() == 1);  // auxiliary edge stays in train
}

TEST_CASE("temporal_split keeps thin users in train and out of eval") {
    std::vector<InteractionRecord> records{
        {"u1", "a", 2, 1}, {"u1", "b", 2, 2}, {"u1", "c", 2, 3},
        {"u2", "a", 2, 1}, {"u2", "b", 2, 2},
    };
    const auto ds = preprocess(records, 3, 0);
    const auto split = temporal_split(ds);
    const int u2 = ds.user_index.at("u2");
    CHECK(split.val_item[u2] == -1);
    CHECK(std::find(split.eval_users.begin(), split.eval_users.end(), u2) ==
          split.eval_users.end());
    int u2_train = 0;
    for (const Edge& e : split.train.edges[2])
        if (e.user == u2) ++u2_train;
    CHECK(u2_train == 2);
}

TEST_CASE("temporal_split edge counting and disjointness") {
    SyntheticConfig config;
    config.num_users = 40;
    config.num_items = 30;
    config.num_behaviors = 3;
    config.interactions_per_behavior = {400, 300, 160};
    config.seed = 5;
    const auto data = generate_synthetic(config);
    const auto ds = preprocess(data.records, 3, 0);
    const auto split = temporal_split(ds);

    const std::size_t total_target = ds.edges[2].size();
    std::size_t held = 0;
    for (int u = 0; u < ds.num_users; ++u) {
        if (split.val_item[u] >= 0) ++held;
        if (split.test_item[u] >= 0) ++held;
    }
    CHECK(split.train.edges[2].size() + held == total_target);

    for (int u : split.eval_users) {
        for (const Edge& e : split.train.edges[2]) {
            if (e.user != u) continue;
            CHECK(e.item != split.val_item[u]);
            CHECK(e.item != split.test_item[u]);
        }
    }
}

TEST_CASE("temporal_split with no qualifying user errors") {
    std::vector<InteractionRecord> records{{"u1", "a", 2, 1}, {"u1", "b", 2, 2}};
    const auto ds = preprocess(records, 3, 0);
    CHECK_THROWS_AS(temporal_split(ds), Error);
}

TEST_CASE("generate_synthetic is deterministic and honors counts") {
    SyntheticConfig config;
    config.num_users = 25;
    config.num_items = 40;
    config.num_behaviors = 3;
    config.interactions_per_behavior = {250, 150, 80};
    config.seed = 123;
    const auto a = generate_synthetic(config);
    const auto b = generate_synthetic(config);
    CHECK(records_fingerprint(a.records) == records_fingerprint(b.records));
    CHECK(a.affinity == b.affinity);

    std::vector<int> counts(3, 0);
    for (const auto& r : a.records) counts[r.behavior] += 1;
    CHECK(counts[0] == 250);
    CHECK(counts[1] == 150);
    CHECK(counts[2] == 80);

    // Every user must come with >= 3 target interactions at distinct times.
    std::map<std::string, std::set<std::int64_t>> target_times;
    for (const auto& r : a.records)
        if (r.behavior == 2) target_times[r.user].insert(r.timestamp);
    CHECK(target_times.size() == 25);
    for (const auto& [user, times] : target_times) CHECK(times.size() >= 3);
}

TEST_CASE("generate_synthetic rejects infeasible configs") {
    SyntheticConfig config;
    config.num_users = 5;
    config.num_items = 4;
    config.num_behaviors = 2;
    config.interactions_per_behavior = {30, 15};  // 30 > 20 cells
    CHECK_THROWS_AS(generate_synthetic(config), Error);
    config.interactions_per_behavior = {10, 10};  // < 3 per user
    CHECK_THROWS_AS(generate_synthetic(config), Error);
}

TEST_CASE("generate_synthetic synergy off decouples target from auxiliary") {
    SyntheticConfig config;
    config.num_users = 200;
    config.num_items = 300;
    config.num_behaviors = 2;
    config.interactions_per_behavior = {8000, 1200};
    config.synergy_strength = 0.0;
    config.seed = 42;
    const auto data = generate_synthetic(config);

    std::vector<std::vector<char>> aux(config.num_users, std::vector<char>(config.num_items, 0));
    std::vector<std::vector<char>> tgt(config.num_users, std::vector<char>(config.num_items, 0));
    for (const auto& r : data.records) {
        const int u = std::stoi(r.user.substr(1));
        const int i = std::stoi(r.item.substr(1));
        (r.behavior == 0 ? aux : tgt)[u][i] = 1;
    }

    // Phi coefficient over all pairs should vanish under independence.
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (int u = 0; u < config.num_users; ++u)
        for (int i = 0; i < config.num_items; ++i) {
            if (aux[u][i] && tgt[u][i]) ++n11;
            else if (aux[u][i]) ++n10;
            else if (tgt[u][i]) ++n01;
            else ++n00;
        }
    const double total = n11 + n10 + n01 + n00;
    const double phi = (n11 * n00 - n10 * n01) /
                       std::sqrt((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00));
    CHECK(std::abs(phi) < 3.0 / std::sqrt(total));
}

TEST_CASE("generate_synthetic planted synergy raises co-occurring affinity") {
    SyntheticConfig config;
    config.num_users = 200;
    config.num_items = 250;
    config.num_behaviors = 2;
    config.interactions_per_behavior = {6000, 800};
    config.synergy_strength = 1.0;
    config.seed = 9;
    const auto data = generate_synthetic(config);

    std::vector<std::vector<char>> aux(config.num_users, std::vector<char>(config.num_items, 0));
    std::vector<std::vector<char>> tgt(config.num_users, std::vector<char>(config.num_items, 0));
    for (const auto& r : data.records) {
        const int u = std::stoi(r.user.substr(1));
        const int i = std::stoi(r.item.substr(1));
        (r.behavior == 0 ? aux : tgt)[u][i] = 1;
    }
    double both_sum = 0.0, aux_only_sum = 0.0;
    int both_n = 0, aux_only_n = 0;
    for (int u = 0; u < config.num_users; ++u)
        for (int i = 0; i < config.num_items; ++i) {
            if (!aux[u][i]) continue;
            if (tgt[u][i]) {
                both_sum += data.affinity(u, i);
                ++both_n;
            } else {
                aux_only_sum += data.affinity(u, i);
                ++aux_only_n;
            }
        }
    REQUIRE(both_n > 0);
    REQUIRE(aux_only_n > 0);
    CHECK(both_sum / both_n > aux_only_sum / aux_only_n);
}

TEST_CASE("split persistence round-trips with identical indices") {
    SyntheticConfig config;
    config.num_users = 15;
    config.num_items = 20;
    config.num_behaviors = 3;
    config.interactions_per_behavior = {150, 100, 50};
    config.seed = 77;
    const auto data = generate_synthetic(config);
    const auto split = temporal_split(preprocess(data.records, 3, 0));

    const std::string dir = std::filesystem::temp_directory_path() / "swgcn_split_rt";
    std::filesystem::remove_all(dir);
    save_split(dir, split, kVocab);
    std::vector<std::string> vocab;
    const auto loaded = load_split(dir, &vocab);

    CHECK(vocab == kVocab);
    CHECK(loaded.train.num_users == split.train.num_users);
    CHECK(loaded.train.num_items == split.train.num_items);
    CHECK(loaded.eval_users == split.eval_users);
    CHECK(loaded.val_item == split.val_item);
    CHECK(loaded.test_item == split.test_item);
    for (int r = 0; r < 3; ++r) CHECK(loaded.train.edges[r] == split.train.edges[r]);
    CHECK(loaded.train.user_ids == split.train.user_ids);

    // The manifest reports pre-split per-behavior totals.
    std::ifstream manifest_in(dir + "/manifest.json");
    std::ostringstream manifest_buf;
    manifest_buf << manifest_in.rdbuf();
    const auto manifest = nlohmann::json::parse(manifest_buf.str());
    CHECK(manifest.at("counts_per_behavior").at("view").get<std::size_t>() == 150);
    CHECK(manifest.at("counts_per_behavior").at("buy").get<std::size_t>() ==
          split.train.edges[2].size() + 2 * split.eval_users.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("load_interactions reads files and reports io errors") {
    const std::string path = std::filesystem::temp_directory_path() / "swgcn_load.tsv";
    std::ofstream(path) << "u1\ti1\tview\t5\nu2\ti2\tbuy\t9\nu3\ti1\tcart\t7\n";
    const auto records = load_interactions(path, kVocab);
    REQUIRE(records.size() == 3);
    CHECK(records[1].behavior == 2);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_interactions("/nonexistent/file.tsv", kVocab), Error);
}

TEST_CASE("vocabulary sizes follow the configured behavior list") {
    // Four-behavior setup with a purchase-count filter: a full 5x5 purchase
    // grid survives, a thin extra user does not.
    std::vector<InteractionRecord> records;
    for (int u = 0; u < 5; ++u)
        for (int i = 0; i < 5; ++i) {
            records.push_back({"u" + std::to_string(u), "i" + std::to_string(i), 3,
                               static_cast<std::int64_t>(10 * u + i)});
            records.push_back({"u" + std::to_string(u), "i" + std::to_string(i), u % 3,
                               static_cast<std::int64_t>(10 * u + i)});
        }
    records.push_back({"u_thin", "i0", 3, 999});
    const auto filtered = preprocess(records, 4, 5);
    CHECK(filtered.num_behaviors == 4);
    CHECK(filtered.num_users == 5);
    CHECK(filtered.user_index.count("u_thin") == 0);

    // Three-behavior setup kept raw: nothing filtered even for thin users.
    const std::vector<InteractionRecord> thin{
        {"u1", "a", 2, 1}, {"u1", "b", 2, 2}, {"u1", "c", 2, 3}, {"u2", "a", 2, 1}};
    const auto raw = preprocess(thin, 3, 0);
    CHECK(raw.num_users == 2);
}

TEST_CASE("affinity sidecar round-trips") {
    Matrix m(3, 4);
    Rng rng(3);
    for (auto& v : m.values()) v = rng.uniform();
    const std::string path = std::filesystem::temp_directory_path() / "swgcn_affinity.tsv";
    save_affinity(path, m);
    CHECK(load_affinity(path) == m);
    std::filesystem::remove(path);
}
