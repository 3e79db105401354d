#include "swgcn/run_config.hpp"

#include <fstream>
#include <sstream>

#include "swgcn/error.hpp"

namespace swgcn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) {
        field = trim(field);
        if (!field.empty()) out.push_back(field);
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    throw Error("config", key + " expects on/off, got '" + value + "'");
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error("config", key + " expects a number, got '" + value + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error("config", key + " expects an integer, got '" + value + "'");
    }
}

} // namespace

void apply_key_value(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "dataset") c.dataset = value;
    else if (key == "out") c.out_dir = value;
    else if (key == "behaviors") c.behaviors = split_csv(value);
    else if (key == "k_list") {
        c.k_list.clear();
        for (const auto& f : split_csv(value)) c.k_list.push_back(static_cast<int>(parse_int(key, f)));
    } else if (key == "min_target_count") c.min_target_count = static_cast<int>(parse_int(key, value));
    else if (key == "dedup") c.dedup = parse_bool(key, value);
    else if (key == "filter_items") c.filter_items = parse_bool(key, value);
    else if (key == "lambda_a") c.train.lambda_a = parse_real(key, value);
    else if (key == "lambda_s") c.train.lambda_s = parse_real(key, value);
    else if (key == "gamma1") c.train.gamma1 = parse_real(key, value);
    else if (key == "gamma2") c.train.gamma2 = parse_real(key, value);
    else if (key == "learning_rate") c.train.learning_rate = parse_real(key, value);
    else if (key == "batch_size") c.train.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "neg_samples") c.train.neg_samples = static_cast<int>(parse_int(key, value));
    else if (key == "layers") c.train.layers = static_cast<int>(parse_int(key, value));
    else if (key == "dim") c.train.dim = static_cast<int>(parse_int(key, value));
    else if (key == "p_message") c.train.p_message = parse_real(key, value);
    else if (key == "patience") c.train.patience = static_cast<int>(parse_int(key, value));
    else if (key == "max_epochs") c.train.max_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "seed") c.train.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "variant") c.train.variant = variant_from_string(value);
    else if (key == "sat_mode") c.train.sat_mode = sat_mode_from_string(value);
    else if (key == "degree_mode") c.train.degree_mode = degree_mode_from_string(value);
    else if (key == "mask_train") c.train.mask_train = parse_bool(key, value);
    else if (key == "synth_users") c.synth_users = static_cast<int>(parse_int(key, value));
    else if (key == "synth_items") c.synth_items = static_cast<int>(parse_int(key, value));
    else if (key == "synth_latent_dim") c.synth_latent_dim = static_cast<int>(parse_int(key, value));
    else if (key == "synth_interactions") {
        c.synth_interactions.clear();
        for (const auto& f : split_csv(value)) c.synth_interactions.push_back(parse_int(key, f));
    } else if (key == "synth_synergy") c.synth_synergy = parse_real(key, value);
    else throw Error("config", "unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig config;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config", "line " + std::to_string(line_no) + ": expected key = value");
        apply_key_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& c) {
    std::ostringstream out;
    out.precision(17);
    auto join_str = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& f : v) {
            if (!s.empty()) s += ',';
            s += f;
        }
        return s;
    };
    std::string ks, si;
    for (int k : c.k_list) ks += (ks.empty() ? "" : ",") + std::to_string(k);
    for (long long v : c.synth_interactions) si += (si.empty() ? "" : ",") + std::to_string(v);

    out << "dataset = " << c.dataset << "\n";
    out << "out = " << c.out_dir << "\n";
    out << "behaviors = " << join_str(c.behaviors) << "\n";
    out << "k_list = " << ks << "\n";
    out << "min_target_count = " << c.min_target_count << "\n";
    out << "dedup = " << (c.dedup ? "on" : "off") << "\n";
    out << "filter_items = " << (c.filter_items ? "on" : "off") << "\n";
    out << "lambda_a = " << c.train.lambda_a << "\n";
    out << "lambda_s = " << c.train.lambda_s << "\n";
    out << "gamma1 = " << c.train.gamma1 << "\n";
    out << "gamma2 = " << c.train.gamma2 << "\n";
    out << "learning_rate = " << c.train.learning_rate << "\n";
    out << "batch_size = " << c.train.batch_size << "\n";
    out << "neg_samples = " << c.train.neg_samples << "\n";
    out << "layers = " << c.train.layers << "\n";
    out << "dim = " << c.train.dim << "\n";
    out << "p_message = " << c.train.p_message << "\n";
    out << "patience = " << c.train.patience << "\n";
    out << "max_epochs = " << c.train.max_epochs << "\n";
    out << "seed = " << c.train.seed << "\n";
    out << "variant = " << to_string(c.train.variant) << "\n";
    out << "sat_mode = " << to_string(c.train.sat_mode) << "\n";
    out << "degree_mode = " << to_string(c.train.degree_mode) << "\n";
    out << "mask_train = " << (c.train.mask_train ? "on" : "off") << "\n";
    out << "synth_users = " << c.synth_users << "\n";
    out << "synth_items = " << c.synth_items << "\n";
    out << "synth_latent_dim = " << c.synth_latent_dim << "\n";
    out << "synth_interactions = " << si << "\n";
    out << "synth_synergy = " << c.synth_synergy << "\n";
    return out.str();
}

} // namespace swgcn
