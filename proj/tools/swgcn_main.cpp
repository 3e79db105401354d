// Command-line front end: preprocess / synth / train / eval / report.
// Config file values come first, CLI flags override, every run leaves a
// manifest sufficient to reproduce it.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "swgcn/checkpoint.hpp"
#include "swgcn/data.hpp"
#include "swgcn/error.hpp"
#include "swgcn/evaluation.hpp"
#include "swgcn/run_config.hpp"
#include "swgcn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FlagOverrides {
    std::string config_path, dataset, out, checkpoint, users_csv;
    std::vector<std::pair<std::string, std::string>> pairs;  // key -> raw value

    void add(const std::string& key, const std::string& value) { pairs.emplace_back(key, value); }
};

swgcn::RunConfig resolve_config(const FlagOverrides& flags) {
    swgcn::RunConfig config;
    if (!flags.config_path.empty()) config = swgcn::load_run_config(flags.config_path);
    for (const auto& [key, value] : flags.pairs) swgcn::apply_key_value(config, key, value);
    if (!flags.dataset.empty()) config.dataset = flags.dataset;
    if (!flags.out.empty()) config.out_dir = flags.out;
    return config;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw swgcn::Error("io", "cannot write " + path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw swgcn::Error("io", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_run_manifest(const swgcn::RunConfig& config, const std::string& command) {
    json manifest;
    manifest["command"] = command;
    manifest["code_version"] = swgcn::kVersion;
    manifest["seed"] = config.train.seed;
    manifest["config"] = swgcn::serialize_run_config(config);
    write_file(config.out_dir + "/run_manifest.json", manifest.dump(2) + "\n");
}

std::string format_metric(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

int cmd_synth(const FlagOverrides& flags) {
    auto config = resolve_config(flags);
    fs::create_directories(config.out_dir);

    swgcn::SyntheticConfig synth;
    synth.num_users = config.synth_users;
    synth.num_items = config.synth_items;
    synth.num_behaviors = static_cast<int>(config.behaviors.size());
    synth.latent_dim = config.synth_latent_dim;
    synth.interactions_per_behavior = config.synth_interactions;
    synth.synergy_strength = config.synth_synergy;
    synth.seed = config.train.seed;

    const auto data = swgcn::generate_synthetic(synth);
    swgcn::save_records(config.out_dir + "/raw.tsv", data.records, config.behaviors);
    swgcn::save_affinity(config.out_dir + "/affinity.tsv", data.affinity);
    write_run_manifest(config, "synth");
    std::cout << "wrote " << data.records.size() << " interactions to " << config.out_dir
              << "/raw.tsv\n";
    return 0;
}

int cmd_preprocess(const FlagOverrides& flags) {
    auto config = resolve_config(flags);
    if (config.dataset.empty()) throw swgcn::Error("config", "preprocess needs --dataset");
    fs::create_directories(config.out_dir);

    const auto records = swgcn::load_interactions(config.dataset, config.behaviors);
    const auto dataset = swgcn::preprocess(records, static_cast<int>(config.behaviors.size()),
                                           config.min_target_count, config.dedup,
                                           config.filter_items);
    const auto split = swgcn::temporal_split(dataset);
    swgcn::save_split(config.out_dir, split, config.behaviors);
    write_run_manifest(config, "preprocess");

    std::cout << "users=" << dataset.num_users << " items=" << dataset.num_items
              << " total_interactions=" << dataset.total_edges() << "\n";
    for (int r = 0; r < dataset.num_behaviors; ++r)
        std::cout << config.behaviors[r] << "=" << dataset.edges[r].size() << "\n";
    return 0;
}

json train_hyper_block(const swgcn::RunConfig& config) {
    json hyper;
    hyper["run_config"] = swgcn::serialize_run_config(config);
    hyper["lambda_s"] = config.train.lambda_s;
    hyper["layers"] = config.train.layers;
    hyper["dim"] = config.train.dim;
    hyper["variant"] = swgcn::to_string(config.train.variant);
    hyper["degree_mode"] = swgcn::to_string(config.train.degree_mode);
    return hyper;
}

std::string history_tsv(const std::vector<swgcn::EpochRecord>& history) {
    std::ostringstream out;
    out.precision(10);
    out << "epoch\tsat_loss\tbpr_loss\tjoint_loss\tval_hr10\tval_ndcg10\twall_ms\n";
    for (const auto& rec : history)
        out << rec.epoch << '\t' << rec.sat << '\t' << rec.bpr << '\t' << rec.joint << '\t'
            << rec.val_hr10 << '\t' << rec.val_ndcg10 << '\t' << static_cast<long long>(rec.wall_ms)
            << '\n';
    return out.str();
}

int cmd_train(const FlagOverrides& flags) {
    auto config = resolve_config(flags);
    if (config.dataset.empty()) throw swgcn::Error("config", "train needs --dataset");
    fs::create_directories(config.out_dir);

    std::vector<std::string> vocab;
    const auto split = swgcn::load_split(config.dataset, &vocab);
    if (!vocab.empty()) config.behaviors = vocab;

    // Rolling checkpoint every 50 epochs; the best snapshot lands at the end.
    const auto hyper = train_hyper_block(config);
    const auto result = swgcn::fit(
        split, config.train,
        [&](const swgcn::EpochRecord& rec, const swgcn::ModelParams& params) {
            if (rec.epoch % 50 == 0)
                swgcn::save_checkpoint(config.out_dir + "/last.ckpt", params, hyper,
                                       config.train.seed);
        });
    swgcn::save_checkpoint(config.out_dir + "/checkpoint.ckpt", result.best_params, hyper,
                           config.train.seed);
    write_file(config.out_dir + "/metrics.tsv", history_tsv(result.history));
    write_run_manifest(config, "train");

    std::cout << "best epoch " << result.best_epoch << " val HR@10 "
              << format_metric(result.best_val_hr10) << " (" << result.history.size()
              << " epochs)\n";
    return 0;
}

int cmd_eval(const FlagOverrides& flags) {
    auto config = resolve_config(flags);
    if (flags.checkpoint.empty()) throw swgcn::Error("config", "eval needs --checkpoint");
    if (config.dataset.empty()) throw swgcn::Error("config", "eval needs --dataset");
    fs::create_directories(config.out_dir);

    const auto ckpt = swgcn::load_checkpoint(flags.checkpoint);
    if (ckpt.hyper.contains("run_config")) {
        auto stored = swgcn::parse_run_config(ckpt.hyper["run_config"].get<std::string>());
        stored.dataset = config.dataset;
        stored.out_dir = config.out_dir;
        // CLI flags win over the checkpoint's stored configuration.
        for (const auto& [key, value] : flags.pairs) swgcn::apply_key_value(stored, key, value);
        config = stored;
    }

    const auto split = swgcn::load_split(config.dataset);
    swgcn::EvalConfig eval_config;
    eval_config.k_list = config.k_list;
    eval_config.mask_train = config.train.mask_train;
    eval_config.num_threads = swgcn::resolve_thread_count(0);
    const auto report = swgcn::evaluate(ckpt.params, split,
                                        config.train.forward_options(false), eval_config);

    std::ostringstream text, csv;
    csv << "metric,k,value\n";
    for (std::size_t i = 0; i < report.k_list.size(); ++i) {
        text << "HR@" << report.k_list[i] << "\t" << format_metric(report.hr[i]) << "\n";
        text << "NDCG@" << report.k_list[i] << "\t" << format_metric(report.ndcg[i]) << "\n";
        csv << "HR," << report.k_list[i] << "," << format_metric(report.hr[i]) << "\n";
        csv << "NDCG," << report.k_list[i] << "," << format_metric(report.ndcg[i]) << "\n";
    }
    text << "eval_users\t" << report.num_eval_users << "\n";
    write_file(config.out_dir + "/report.txt", text.str());
    write_file(config.out_dir + "/report.csv", csv.str());
    write_run_manifest(config, "eval");
    std::cout << text.str();
    return 0;
}

// Deterministic SVG heat strip per user: one rectangle per Venn cell, shade
// proportional to the cell's mean weight relative to the user's maximum.
std::string render_synergy_svg(const std::string& csv_text) {
    struct Row {
        std::string user, label;
        int items;
        double weight;
    };
    std::vector<Row> rows;
    std::istringstream in(csv_text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Row row;
        std::string field;
        std::getline(ls, row.user, ',');
        std::getline(ls, row.label, ',');
        std::getline(ls, field, ',');
        row.items = std::stoi(field);
        std::getline(ls, field, ',');
        row.weight = std::stod(field);
        rows.push_back(row);
    }

    std::map<std::string, double> user_max;
    for (const auto& row : rows)
        user_max[row.user] = std::max(user_max[row.user], row.weight);

    constexpr int cell_w = 110, cell_h = 34, label_w = 90;
    std::map<std::string, int> user_row;
    for (const auto& row : rows)
        if (!user_row.count(row.user)) user_row[row.user] = static_cast<int>(user_row.size());
    std::map<std::string, int> next_col;

    std::ostringstream svg;
    int max_cols = 0;
    for (const auto& row : rows) max_cols = std::max(max_cols, ++next_col[row.user]);
    const int width = label_w + max_cols * cell_w + 10;
    const int height = static_cast<int>(user_row.size()) * (cell_h + 8) + 10;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    next_col.clear();
    for (const auto& row : rows) {
        const int r = user_row[row.user];
        const int c = next_col[row.user]++;
        const int x = label_w + c * cell_w;
        const int y = 5 + r * (cell_h + 8);
        const double rel = user_max[row.user] > 0 ? row.weight / user_max[row.user] : 0.0;
        const int shade = 255 - static_cast<int>(rel * 200.0);
        if (c == 0)
            svg << "  <text x=\"5\" y=\"" << y + 22 << "\" font-size=\"12\">user " << row.user
                << "</text>\n";
        svg << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w - 4
            << "\" height=\"" << cell_h << "\" fill=\"rgb(" << shade << "," << shade
            << ",255)\" stroke=\"black\"/>\n";
        svg << "  <text x=\"" << x + 4 << "\" y=\"" << y + 14 << "\" font-size=\"10\">"
            << row.label << "</text>\n";
        std::ostringstream w;
        w.precision(4);
        w << row.weight;
        svg << "  <text x=\"" << x + 4 << "\" y=\"" << y + 28 << "\" font-size=\"10\">"
            << w.str() << " (n=" << row.items << ")</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

int cmd_report(const FlagOverrides& flags) {
    auto config = resolve_config(flags);
    if (flags.checkpoint.empty()) throw swgcn::Error("config", "report needs --checkpoint");
    if (config.dataset.empty()) throw swgcn::Error("config", "report needs --dataset");
    if (flags.users_csv.empty()) throw swgcn::Error("config", "report needs --users");
    fs::create_directories(config.out_dir);

    const auto ckpt = swgcn::load_checkpoint(flags.checkpoint);
    std::vector<std::string> vocab;
    const auto split = swgcn::load_split(config.dataset, &vocab);

    std::vector<int> users;
    std::stringstream ss(flags.users_csv);
    std::string field;
    while (std::getline(ss, field, ',')) {
        if (field.empty()) continue;
        auto it = split.train.user_index.find(field);
        if (it != split.train.user_index.end()) {
            users.push_back(it->second);
        } else {
            try {
                users.push_back(std::stoi(field));
            } catch (const std::exception&) {
                throw swgcn::Error("lookup", "unknown user '" + field + "'");
            }
        }
    }

    const auto cells = swgcn::synergy_report(ckpt.params, split.train, users);
    std::ostringstream csv;
    csv << "user,cell,item_count,mean_weight\n";
    csv.precision(10);
    for (const auto& cell : cells)
        csv << split.train.user_ids[cell.user] << ","
            << swgcn::behavior_mask_label(cell.behavior_mask, vocab) << "," << cell.item_count
            << "," << cell.mean_weight << "\n";
    write_file(config.out_dir + "/synergy.csv", csv.str());
    write_file(config.out_dir + "/synergy.svg", render_synergy_svg(csv.str()));
    write_run_manifest(config, "report");
    std::cout << "wrote synergy report for " << users.size() << " users\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SWGCN multi-behavior recommender"};
    app.require_subcommand(1);

    FlagOverrides flags;
    std::string flag_variant, flag_sat_mode, flag_mask_train, flag_k_list, flag_degree_mode;
    std::string flag_lambda_s, flag_lambda_a, flag_p_message, flag_seed, flag_behaviors;
    std::string flag_min_target, flag_max_epochs, flag_patience, flag_lr, flag_dim;
    std::string flag_synth_users, flag_synth_items, flag_synth_interactions, flag_synth_synergy;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "flat key = value config file");
        cmd->add_option("--dataset", flags.dataset, "dataset path");
        cmd->add_option("--out", flags.out, "output directory");
        cmd->add_option("--seed", flag_seed, "random seed");
        cmd->add_option("--variant", flag_variant, "base|swgcn_t|no_sat|no_tpw");
        cmd->add_option("--lambda_s", flag_lambda_s, "self-loop weight");
        cmd->add_option("--lambda_a", flag_lambda_a, "alignment loss weight");
        cmd->add_option("--p-message", flag_p_message, "message dropout rate");
        cmd->add_option("--sat-mode", flag_sat_mode, "signed|squared");
        cmd->add_option("--k-list", flag_k_list, "comma-separated K values");
        cmd->add_option("--mask-train", flag_mask_train, "on|off");
        cmd->add_option("--degree-mode", flag_degree_mode, "weighted|structural");
        cmd->add_option("--behaviors", flag_behaviors, "ordered labels, last = target");
        cmd->add_option("--min-target-count", flag_min_target, "filter threshold");
        cmd->add_option("--max-epochs", flag_max_epochs, "training epoch cap");
        cmd->add_option("--patience", flag_patience, "early stopping patience");
        cmd->add_option("--learning-rate", flag_lr, "Adam step size");
        cmd->add_option("--dim", flag_dim, "embedding dimension");
    };

    auto* synth = app.add_subcommand("synth", "generate synthetic interactions");
    add_common(synth);
    synth->add_option("--synth-users", flag_synth_users, "user count");
    synth->add_option("--synth-items", flag_synth_items, "item count");
    synth->add_option("--synth-interactions", flag_synth_interactions,
                      "per-behavior edge counts (csv)");
    synth->add_option("--synth-synergy", flag_synth_synergy, "co-occurrence strength in [0,1]");

    auto* preprocess = app.add_subcommand("preprocess", "clean, filter, and split a raw dump");
    add_common(preprocess);
    auto* train = app.add_subcommand("train", "fit on a preprocessed split");
    add_common(train);
    auto* eval = app.add_subcommand("eval", "rank and score a checkpoint");
    add_common(eval);
    eval->add_option("--checkpoint", flags.checkpoint, "checkpoint path");
    auto* report = app.add_subcommand("report", "per-user synergy weight report");
    add_common(report);
    report->add_option("--checkpoint", flags.checkpoint, "checkpoint path");
    report->add_option("--users", flags.users_csv, "comma-separated users");

    CLI11_PARSE(app, argc, argv);

    auto stage = [&](const std::string& key, const std::string& value) {
        if (!value.empty()) flags.add(key, value);
    };
    stage("seed", flag_seed);
    stage("variant", flag_variant);
    stage("lambda_s", flag_lambda_s);
    stage("lambda_a", flag_lambda_a);
    stage("p_message", flag_p_message);
    stage("sat_mode", flag_sat_mode);
    stage("k_list", flag_k_list);
    stage("mask_train", flag_mask_train);
    stage("degree_mode", flag_degree_mode);
    stage("behaviors", flag_behaviors);
    stage("min_target_count", flag_min_target);
    stage("max_epochs", flag_max_epochs);
    stage("patience", flag_patience);
    stage("learning_rate", flag_lr);
    stage("dim", flag_dim);
    stage("synth_users", flag_synth_users);
    stage("synth_items", flag_synth_items);
    stage("synth_interactions", flag_synth_interactions);
    stage("synth_synergy", flag_synth_synergy);

    try {
        if (app.got_subcommand(synth)) return cmd_synth(flags);
        if (app.got_subcommand(preprocess)) return cmd_preprocess(flags);
        if (app.got_subcommand(train)) return cmd_train(flags);
        if (app.got_subcommand(eval)) return cmd_eval(flags);
        if (app.got_subcommand(report)) return cmd_report(flags);
    } catch (const swgcn::Error& e) {
        std::cerr << "error/" << e.category() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error/internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
