#include "swgcn/data.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "swgcn/error.hpp"
#include "swgcn/rng.hpp"

namespace swgcn {

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::int64_t parse_timestamp(const std::string& field, std::size_t line_no) {
    std::int64_t value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw Error("parse", "line " + std::to_string(line_no) + ": bad timestamp '" + field + "'");
    if (value < 0)
        throw Error("parse", "line " + std::to_string(line_no) + ": negative timestamp");
    return value;
}

} // namespace

std::vector<InteractionRecord> parse_interactions(const std::string& text,
                                                  const std::vector<std::string>& behavior_vocab,
                                                  const ColumnSchema& schema) {
    std::vector<InteractionRecord> records;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string line = nl == std::string::npos ? text.substr(start)
                                                   : text.substr(start, nl - start);
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        auto fields = split_fields(line, schema.delimiter);
        if (fields.size() != 4)
            throw Error("parse", "line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                     std::to_string(fields.size()));
        auto it = std::find(behavior_vocab.begin(), behavior_vocab.end(), fields[2]);
        if (it == behavior_vocab.end())
            throw Error("vocab", "line " + std::to_string(line_no) + ": unknown behavior '" +
                                     fields[2] + "'");
        InteractionRecord rec;
        rec.user = fields[0];
        rec.item = fields[1];
        rec.behavior = static_cast<int>(it - behavior_vocab.begin());
        rec.timestamp = parse_timestamp(fields[3], line_no);
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                 const std::vector<std::string>& behavior_vocab,
                                                 const ColumnSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_interactions(buf.str(), behavior_vocab, schema);
}

InteractionDataset preprocess(const std::vector<InteractionRecord>& records,
                              int num_behaviors,
                              int min_target_count,
                              bool dedup,
                              bool filter_items) {
    if (records.empty()) throw Error("data", "no interaction records");
    for (const auto& rec : records) {
        if (rec.behavior < 0 || rec.behavior >= num_behaviors)
            throw Error("vocab", "behavior index " + std::to_string(rec.behavior) +
                                     " outside vocabulary of size " + std::to_string(num_behaviors));
    }

    // Collapse duplicate (user, item, behavior) triples. With dedup the
    // earliest timestamp wins; otherwise the first instance in input order.
    struct Key {
        std::string user, item;
        int behavior;
        bool operator<(const Key& o) const {
            if (user != o.user) return user < o.user;
            if (item != o.item) return item < o.item;
            return behavior < o.behavior;
        }
    };
    std::map<Key, std::pair<std::int64_t, std::size_t>> collapsed;  // -> (timestamp, input order)
    for (std::size_t idx = 0; idx < records.size(); ++idx) {
        const auto& rec = records[idx];
        Key key{rec.user, rec.item, rec.behavior};
        auto [it, inserted] = collapsed.try_emplace(key, std::make_pair(rec.timestamp, idx));
        if (!inserted && dedup && rec.timestamp < it->second.first)
            it->second = {rec.timestamp, idx};
    }

    const int target = num_behaviors - 1;
    std::set<std::string> dropped_users, dropped_items;
    bool changed = true;
    while (changed && min_target_count > 0) {
        changed = false;
        std::map<std::string, int> user_target, item_target;
        for (const auto& [key, _] : collapsed) {
            if (dropped_users.count(key.user) || dropped_items.count(key.item)) continue;
            if (key.behavior != target) continue;
            ++user_target[key.user];
            ++item_target[key.item];
        }
        for (const auto& [key, _] : collapsed) {
            if (dropped_users.count(key.user) || dropped_items.count(key.item)) continue;
            if (user_target[key.user] < min_target_count) {
                dropped_users.insert(key.user);
                changed = true;
            }
            if (filter_items && item_target[key.item] < min_target_count) {
                dropped_items.insert(key.item);
                changed = true;
            }
        }
    }

    // Reindex survivors in input order of their first surviving record.
    InteractionDataset ds;
    ds.num_behaviors = num_behaviors;
    ds.edges.resize(num_behaviors);
    struct Survivor {
        const Key* key;
        std::int64_t timestamp;
        std::size_t order;
    };
    std::vector<Survivor> surviving;
    surviving.reserve(collapsed.size());
    for (const auto& [key, value] : collapsed) {
        if (dropped_users.count(key.user) || dropped_items.count(key.item)) continue;
        surviving.push_back({&key, value.first, value.second});
    }
    if (surviving.empty()) throw Error("data", "all records filtered out");
    std::sort(surviving.begin(), surviving.end(),
              [](const Survivor& a, const Survivor& b) { return a.order < b.order; });

    auto user_id = [&](const std::string& ext) {
        auto it = ds.user_index.find(ext);
        if (it != ds.user_index.end()) return it->second;
        int id = static_cast<int>(ds.user_ids.size());
        ds.user_ids.push_back(ext);
        ds.user_index.emplace(ext, id);
        return id;
    };
    auto item_id = [&](const std::string& ext) {
        auto it = ds.item_index.find(ext);
        if (it != ds.item_index.end()) return it->second;
        int id = static_cast<int>(ds.item_ids.size());
        ds.item_ids.push_back(ext);
        ds.item_index.emplace(ext, id);
        return id;
    };
    for (const auto& s : surviving)
        ds.edges[s.key->behavior].push_back({user_id(s.key->user), item_id(s.key->item), s.timestamp});

    ds.num_users = static_cast<int>(ds.user_ids.size());
    ds.num_items = static_cast<int>(ds.item_ids.size());
    for (auto& edges : ds.edges)
        std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
            return a.user != b.user ? a.user < b.user : a.item < b.item;
        });
    return ds;
}

SplitDataset temporal_split(const InteractionDataset& dataset) {
    const int target = dataset.target_behavior();
    SplitDataset split;
    split.train = dataset;
    split.val_item.assign(dataset.num_users, -1);
    split.test_item.assign(dataset.num_users, -1);

    // Per-user target history in (timestamp, arrival) order. Edges are stored
    // sorted by (user, item), so the position within the sorted list is the
    // stable tiebreak the split promises.
    std::vector<std::vector<std::pair<std::int64_t, int>>> history(dataset.num_users);
    const auto& target_edges = dataset.edges[target];
    for (int e = 0; e < static_cast<int>(target_edges.size()); ++e)
        history[target_edges[e].user].push_back({target_edges[e].timestamp, e});

    std::set<int> held_out;
    for (int u = 0; u < dataset.num_users; ++u) {
        auto& h = history[u];
        if (h.size() < 3) continue;
        std::stable_sort(h.begin(), h.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        const int val_edge = h[h.size() - 2].second;
        const int test_edge = h[h.size() - 1].second;
        split.val_item[u] = target_edges[val_edge].item;
        split.test_item[u] = target_edges[test_edge].item;
        held_out.insert(val_edge);
        held_out.insert(test_edge);
        split.eval_users.push_back(u);
    }
    if (split.eval_users.empty()) throw Error("split", "no user has >= 3 target interactions");

    std::vector<Edge> train_target;
    train_target.reserve(target_edges.size() - held_out.size());
    for (int e = 0; e < static_cast<int>(target_edges.size()); ++e)
        if (!held_out.count(e)) train_target.push_back(target_edges[e]);
    split.train.edges[target] = std::move(train_target);
    return split;
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
    if (config.num_users <= 0 || config.num_items <= 0 || config.num_behaviors <= 0 ||
        config.latent_dim <= 0)
        throw Error("config", "synthetic dimensions must be positive");
    if (static_cast<int>(config.interactions_per_behavior.size()) != config.num_behaviors)
        throw Error("config", "interactions_per_behavior must list one count per behavior");
    if (config.synergy_strength < 0.0 || config.synergy_strength > 1.0)
        throw Error("config", "synergy_strength must lie in [0, 1]");
    const long long cells =
        static_cast<long long>(config.num_users) * static_cast<long long>(config.num_items);
    for (long long count : config.interactions_per_behavior) {
        if (count <= 0) throw Error("config", "interaction counts must be positive");
        if (count > cells) throw Error("config", "more edges requested than matrix cells");
    }
    const int target = config.num_behaviors - 1;
    if (config.interactions_per_behavior[target] <
        3LL * static_cast<long long>(config.num_users))
        throw Error("config", "target behavior needs at least 3 interactions per user");

    Rng rng(config.seed);

    // Latent factors -> sigmoid affinity oracle in (0, 1).
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
    Matrix user_latent(config.num_users, config.latent_dim);
    Matrix item_latent(config.num_items, config.latent_dim);
    for (auto& v : user_latent.values()) v = rng.normal() * scale;
    for (auto& v : item_latent.values()) v = rng.normal() * scale;
    Matrix affinity(config.num_users, config.num_items);
    for (int u = 0; u < config.num_users; ++u)
        for (int i = 0; i < config.num_items; ++i) {
            const double z = dot(user_latent.row(u), item_latent.row(i));
            affinity(u, i) = 1.0 / (1.0 + std::exp(-3.0 * z));
        }

    // Spread each behavior's edge budget evenly over users.
    auto per_user_counts = [&](long long total) {
        std::vector<int> counts(config.num_users, static_cast<int>(total / config.num_users));
        for (long long k = 0; k < total % config.num_users; ++k) counts[k] += 1;
        if (counts[0] > config.num_items)
            throw Error("config", "per-user edge count exceeds item count");
        return counts;
    };

    constexpr double kAuxNoise = 0.25;  // jitter on the affinity-driven half
    std::vector<std::vector<std::vector<int>>> picks(
        config.num_behaviors, std::vector<std::vector<int>>(config.num_users));

    // Auxiliary behaviors: per user a mixture of affinity-driven picks and
    // uniform noise picks, so edges differ in how much preference they carry.
    for (int r = 0; r < target; ++r) {
        auto counts = per_user_counts(config.interactions_per_behavior[r]);
        for (int u = 0; u < config.num_users; ++u) {
            auto& chosen = picks[r][u];
            std::set<int> taken;
            const int relevant = (counts[u] + 1) / 2;
            std::vector<std::pair<double, int>> scored(config.num_items);
            for (int i = 0; i < config.num_items; ++i)
                scored[i] = {affinity(u, i) + kAuxNoise * rng.uniform(), i};
            std::partial_sort(scored.begin(), scored.begin() + relevant, scored.end(),
                              [](const auto& a, const auto& b) {
                                  return a.first != b.first ? a.first > b.first
                                                            : a.second < b.second;
                              });
            for (int k = 0; k < relevant; ++k) taken.insert(scored[k].second);
            while (static_cast<int>(taken.size()) < counts[u])
                taken.insert(rng.uniform_index(config.num_items));
            chosen.assign(taken.begin(), taken.end());
        }
    }

    // Target behavior: with probability synergy_strength draw from the
    // top-affinity half of the user's auxiliary items, otherwise uniformly.
    auto target_counts = per_user_counts(config.interactions_per_behavior[target]);
    for (int u = 0; u < config.num_users; ++u) {
        std::set<int> aux_pool;
        for (int r = 0; r < target; ++r) aux_pool.insert(picks[r][u].begin(), picks[r][u].end());
        std::vector<int> pool(aux_pool.begin(), aux_pool.end());
        std::sort(pool.begin(), pool.end(), [&](int a, int b) {
            return affinity(u, a) != affinity(u, b) ? affinity(u, a) > affinity(u, b) : a < b;
        });
        pool.resize((pool.size() + 1) / 2);  // high-affinity half

        std::set<int> chosen;
        std::vector<int> pool_left = pool;
        for (int k = 0; k < target_counts[u]; ++k) {
            int item = -1;
            if (!pool_left.empty() && rng.uniform() < config.synergy_strength) {
                const int idx = rng.uniform_index(static_cast<int>(pool_left.size()));
                item = pool_left[idx];
                pool_left.erase(pool_left.begin() + idx);
            } else {
                do {
                    item = rng.uniform_index(config.num_items);
                } while (chosen.count(item));
                auto it = std::find(pool_left.begin(), pool_left.end(), item);
                if (it != pool_left.end()) pool_left.erase(it);
            }
            chosen.insert(item);
        }
        // Random temporal order, so the held-out last interactions are
        // exchangeable with the training ones.
        auto& ordered = picks[target][u];
        ordered.assign(chosen.begin(), chosen.end());
        rng.shuffle(ordered);
    }

    // Emit behavior-major with per-user clocks; target edges come last so the
    // temporal split always holds out target interactions.
    SyntheticData out;
    out.affinity = std::move(affinity);
    std::vector<std::int64_t> clock(config.num_users, 0);
    for (int r = 0; r < config.num_behaviors; ++r)
        for (int u = 0; u < config.num_users; ++u)
            for (int item : picks[r][u])
                out.records.push_back({"u" + std::to_string(u), "i" + std::to_string(item), r,
                                       ++clock[u]});
    return out;
}

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream outfile(path, std::ios::binary);
    if (!outfile) throw Error("io", "cannot write " + path);
    outfile << text;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string records_to_tsv(const std::vector<InteractionRecord>& records,
                           const std::vector<std::string>& behavior_vocab) {
    std::string out;
    for (const auto& rec : records) {
        out += rec.user;
        out += '\t';
        out += rec.item;
        out += '\t';
        out += behavior_vocab[rec.behavior];
        out += '\t';
        out += std::to_string(rec.timestamp);
        out += '\n';
    }
    return out;
}

std::string edges_to_tsv(const InteractionDataset& ds, int behavior,
                         const std::vector<std::string>& behavior_vocab) {
    std::string out;
    for (const Edge& e : ds.edges[behavior]) {
        out += ds.user_ids[e.user];
        out += '\t';
        out += ds.item_ids[e.item];
        out += '\t';
        out += behavior_vocab[behavior];
        out += '\t';
        out += std::to_string(e.timestamp);
        out += '\n';
    }
    return out;
}

} // namespace

void save_records(const std::string& path, const std::vector<InteractionRecord>& records,
                  const std::vector<std::string>& behavior_vocab) {
    write_text_file(path, records_to_tsv(records, behavior_vocab));
}

void save_affinity(const std::string& path, const Matrix& affinity) {
    std::ostringstream out;
    out.precision(17);
    out << affinity.rows() << '\t' << affinity.cols() << '\n';
    for (std::size_t u = 0; u < affinity.rows(); ++u) {
        for (std::size_t i = 0; i < affinity.cols(); ++i) {
            if (i) out << '\t';
            out << affinity(u, i);
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

Matrix load_affinity(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::size_t rows = 0, cols = 0;
    in >> rows >> cols;
    Matrix m(rows, cols);
    for (std::size_t u = 0; u < rows; ++u)
        for (std::size_t i = 0; i < cols; ++i)
            if (!(in >> m(u, i))) throw Error("parse", "truncated affinity file " + path);
    return m;
}

void save_split(const std::string& dir, const SplitDataset& split,
                const std::vector<std::string>& behavior_vocab) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& ds = split.train;

    std::string users, items;
    for (int u = 0; u < ds.num_users; ++u)
        users += std::to_string(u) + "\t" + ds.user_ids[u] + "\n";
    for (int i = 0; i < ds.num_items; ++i)
        items += std::to_string(i) + "\t" + ds.item_ids[i] + "\n";
    write_text_file(dir + "/users.tsv", users);
    write_text_file(dir + "/items.tsv", items);

    std::string train;
    for (int r = 0; r < ds.num_behaviors; ++r) train += edges_to_tsv(ds, r, behavior_vocab);
    write_text_file(dir + "/train.tsv", train);

    auto holdout_tsv = [&](const std::vector<int>& items_per_user) {
        std::string out;
        for (int u : split.eval_users) {
            out += ds.user_ids[u];
            out += '\t';
            out += ds.item_ids[items_per_user[u]];
            out += '\t';
            out += behavior_vocab.back();
            out += "\t0\n";
        }
        return out;
    };
    write_text_file(dir + "/val.tsv", holdout_tsv(split.val_item));
    write_text_file(dir + "/test.tsv", holdout_tsv(split.test_item));

    nlohmann::json manifest;
    manifest["num_users"] = ds.num_users;
    manifest["num_items"] = ds.num_items;
    manifest["num_behaviors"] = ds.num_behaviors;
    manifest["behaviors"] = behavior_vocab;
    nlohmann::json train_counts = nlohmann::json::object();
    nlohmann::json full_counts = nlohmann::json::object();
    std::size_t total = 0;
    for (int r = 0; r < ds.num_behaviors; ++r) {
        std::size_t count = ds.edges[r].size();
        train_counts[behavior_vocab[r]] = count;
        if (r == ds.target_behavior()) count += 2 * split.eval_users.size();
        full_counts[behavior_vocab[r]] = count;
        total += count;
    }
    manifest["train_counts"] = train_counts;
    manifest["counts_per_behavior"] = full_counts;
    manifest["total_interactions"] = total;
    manifest["num_eval_users"] = split.eval_users.size();
    manifest["eval_users"] = split.eval_users;
    write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

SplitDataset load_split(const std::string& dir, std::vector<std::string>* behavior_vocab_out) {
    const auto manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    std::vector<std::string> vocab = manifest.at("behaviors").get<std::vector<std::string>>();
    if (behavior_vocab_out) *behavior_vocab_out = vocab;

    SplitDataset split;
    auto& ds = split.train;
    ds.num_users = manifest.at("num_users").get<int>();
    ds.num_items = manifest.at("num_items").get<int>();
    ds.num_behaviors = static_cast<int>(vocab.size());
    ds.edges.resize(ds.num_behaviors);

    auto load_ids = [&](const std::string& path, std::vector<std::string>& ids,
                        std::unordered_map<std::string, int>& index, int expected) {
        ids.resize(expected);
        for (const auto& rec : split_fields(read_text_file(path), '\n')) {
            if (rec.empty()) continue;
            auto fields = split_fields(rec, '\t');
            if (fields.size() != 2) throw Error("parse", "bad id map line in " + path);
            const int dense = std::stoi(fields[0]);
            if (dense < 0 || dense >= expected) throw Error("parse", "id out of range in " + path);
            ids[dense] = fields[1];
            index.emplace(fields[1], dense);
        }
    };
    load_ids(dir + "/users.tsv", ds.user_ids, ds.user_index, ds.num_users);
    load_ids(dir + "/items.tsv", ds.item_ids, ds.item_index, ds.num_items);

    auto lookup = [&](const InteractionRecord& rec) {
        auto u = ds.user_index.find(rec.user);
        auto i = ds.item_index.find(rec.item);
        if (u == ds.user_index.end() || i == ds.item_index.end())
            throw Error("parse", "interaction references unknown id");
        return std::make_pair(u->second, i->second);
    };
    for (const auto& rec : parse_interactions(read_text_file(dir + "/train.tsv"), vocab)) {
        auto [u, i] = lookup(rec);
        ds.edges[rec.behavior].push_back({u, i, rec.timestamp});
    }
    for (auto& edges : ds.edges)
        std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
            return a.user != b.user ? a.user < b.user : a.item < b.item;
        });

    split.val_item.assign(ds.num_users, -1);
    split.test_item.assign(ds.num_users, -1);
    for (const auto& rec : parse_interactions(read_text_file(dir + "/val.tsv"), vocab)) {
        auto [u, i] = lookup(rec);
        split.val_item[u] = i;
    }
    for (const auto& rec : parse_interactions(read_text_file(dir + "/test.tsv"), vocab)) {
        auto [u, i] = lookup(rec);
        split.test_item[u] = i;
    }
    split.eval_users = manifest.at("eval_users").get<std::vector<int>>();
    return split;
}

} // namespace swgcn
