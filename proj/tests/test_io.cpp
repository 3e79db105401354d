#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "swgcn/checkpoint.hpp"
#include "swgcn/data.hpp"
#include "swgcn/error.hpp"
#include "swgcn/run_config.hpp"

using namespace swgcn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

#ifdef SWGCN_CLI_PATH
int run_cli(const std::string& args) {
    const std::string command = std::string(SWGCN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(command.c_str());
}
#endif

} // namespace

TEST_CASE("checkpoint round-trips bit exactly") {
    const auto params = init_params(4, 6, 5, 2, 321);
    nlohmann::json hyper;
    hyper["lambda_s"] = 0.25;
    hyper["note"] = "round trip";

    const fs::path path = fs::temp_directory_path() / "swgcn_test.ckpt";
    save_checkpoint(path.string(), params, hyper, 99);
    const auto loaded = load_checkpoint(path.string());

    CHECK(loaded.seed == 99);
    CHECK(loaded.hyper["lambda_s"] == 0.25);
    CHECK(loaded.params.num_users == 4);
    CHECK(loaded.params.num_behaviors == 2);
    const auto expected = params.tensors();
    const auto actual = loaded.params.tensors();
    REQUIRE(expected.size() == actual.size());
    for (std::size_t t = 0; t < expected.size(); ++t) {
        CHECK(expected[t].first == actual[t].first);
        CHECK(*expected[t].second == *actual[t].second);
    }
    fs::remove(path);
}

TEST_CASE("checkpoint loader rejects other files") {
    const fs::path path = fs::temp_directory_path() / "swgcn_not_a.ckpt";
    std::ofstream(path) << "plain text";
    CHECK_THROWS_AS(load_checkpoint(path.string()), Error);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/swgcn.ckpt"), Error);
    fs::remove(path);
}

TEST_CASE("run config round-trips through serialization") {
    RunConfig config;
    config.behaviors = {"view", "fav", "cart", "buy"};
    config.train.lambda_a = 0.35;
    config.train.lambda_s = 0.2;
    config.train.variant = Variant::swgcn_t;
    config.train.sat_mode = SatMode::signed_diff;
    config.train.mask_train = false;
    config.k_list = {5, 10};
    config.min_target_count = 5;
    config.synth_interactions = {100, 50, 25, 30};

    const std::string once = serialize_run_config(config);
    const RunConfig parsed = parse_run_config(once);
    CHECK(serialize_run_config(parsed) == once);
    CHECK(parsed.behaviors == config.behaviors);
    CHECK(parsed.train.lambda_a == config.train.lambda_a);
    CHECK(parsed.train.variant == Variant::swgcn_t);
    CHECK(parsed.k_list == config.k_list);
}

TEST_CASE("default run config carries the documented training setup") {
    const RunConfig config;
    CHECK(config.train.dim == 32);
    CHECK(config.train.learning_rate == 1e-3);
    CHECK(config.train.neg_samples == 4);
    CHECK(config.train.patience == 50);
    CHECK(config.train.batch_size == 2048);
    CHECK(config.train.layers == 3);
    CHECK(config.train.gamma1 == 1e-5);
    CHECK(config.train.gamma2 == 1e-5);
    CHECK(config.k_list == std::vector<int>{10, 20, 50, 100, 200});
    CHECK(config.train.sat_mode == SatMode::squared);
    CHECK(config.train.mask_train);

    const std::string text = serialize_run_config(config);
    CHECK(text.find("dim = 32") != std::string::npos);
    CHECK(text.find("learning_rate = 0.001") != std::string::npos);
    CHECK(text.find("neg_samples = 4") != std::string::npos);
    CHECK(text.find("patience = 50") != std::string::npos);
    CHECK(text.find("k_list = 10,20,50,100,200") != std::string::npos);
}

TEST_CASE("run config parser flags bad input") {
    CHECK_THROWS_AS(parse_run_config("nonsense line\n"), Error);
    CHECK_THROWS_AS(parse_run_config("unknown_key = 3\n"), Error);
    CHECK_THROWS_AS(parse_run_config("lambda_a = not_a_number\n"), Error);
    CHECK_THROWS_AS(parse_run_config("variant = bogus\n"), Error);

    const RunConfig config = parse_run_config("# comment only\n\nlambda_a = 0.7 # trailing\n");
    CHECK(config.train.lambda_a == 0.7);
}

#ifdef SWGCN_CLI_PATH

TEST_CASE("cli pipeline: synth, preprocess, train, eval, report") {
    const fs::path root = fs::temp_directory_path() / "swgcn_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string base = root.string();

    REQUIRE(run_cli("synth --out " + base + "/synth --behaviors view,buy"
                    " --synth-users 25 --synth-items 30 --synth-interactions 250,100 --seed 5") ==
            0);
    REQUIRE(fs::exists(root / "synth/raw.tsv"));
    REQUIRE(fs::exists(root / "synth/run_manifest.json"));

    // The oracle sidecar loads back and matches a fresh generation.
    SyntheticConfig synth_config;
    synth_config.num_users = 25;
    synth_config.num_items = 30;
    synth_config.num_behaviors = 2;
    synth_config.interactions_per_behavior = {250, 100};
    synth_config.seed = 5;
    const auto regenerated = generate_synthetic(synth_config);
    const Matrix sidecar = load_affinity((root / "synth/affinity.tsv").string());
    REQUIRE(sidecar.rows() == 25);
    REQUIRE(sidecar.cols() == 30);
    CHECK(sidecar == regenerated.affinity);

    REQUIRE(run_cli("preprocess --dataset " + base + "/synth/raw.tsv --behaviors view,buy --out " +
                    base + "/split") == 0);
    const std::string manifest_once = slurp(root / "split/manifest.json");
    REQUIRE(run_cli("preprocess --dataset " + base + "/synth/raw.tsv --behaviors view,buy --out " +
                    base + "/split2") == 0);
    CHECK(slurp(root / "split2/manifest.json") == manifest_once);

    REQUIRE(run_cli("train --dataset " + base + "/split --out " + base +
                    "/run --dim 8 --max-epochs 4 --patience 10 --seed 3") == 0);
    REQUIRE(fs::exists(root / "run/checkpoint.ckpt"));
    REQUIRE(fs::exists(root / "run/metrics.tsv"));

    REQUIRE(run_cli("eval --checkpoint " + base + "/run/checkpoint.ckpt --dataset " + base +
                    "/split --out " + base + "/eval1 --k-list 1,5,10") == 0);
    REQUIRE(run_cli("eval --checkpoint " + base + "/run/checkpoint.ckpt --dataset " + base +
                    "/split --out " + base + "/eval2 --k-list 1,5,10") == 0);
    CHECK(slurp(root / "eval1/report.txt") == slurp(root / "eval2/report.txt"));
    CHECK(slurp(root / "eval1/report.csv") == slurp(root / "eval2/report.csv"));

    REQUIRE(run_cli("report --checkpoint " + base + "/run/checkpoint.ckpt --dataset " + base +
                    "/split --users u0,u1,u2 --out " + base + "/rep1") == 0);
    REQUIRE(run_cli("report --checkpoint " + base + "/run/checkpoint.ckpt --dataset " + base +
                    "/split --users u0,u1,u2 --out " + base + "/rep2") == 0);
    CHECK(slurp(root / "rep1/synergy.csv") == slurp(root / "rep2/synergy.csv"));
    CHECK(slurp(root / "rep1/synergy.svg") == slurp(root / "rep2/synergy.svg"));
    CHECK(slurp(root / "rep1/synergy.csv").find("view+buy") != std::string::npos);

    fs::remove_all(root);
}

TEST_CASE("cli runs ablation variants") {
    const fs::path root = fs::temp_directory_path() / "swgcn_cli_variants";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string base = root.string();
    REQUIRE(run_cli("synth --out " + base + "/synth --behaviors view,buy"
                    " --synth-users 20 --synth-items 25 --synth-interactions 200,80 --seed 2") ==
            0);
    REQUIRE(run_cli("preprocess --dataset " + base + "/synth/raw.tsv --behaviors view,buy --out " +
                    base + "/split") == 0);
    for (const std::string variant : {"no_tpw", "no_sat", "swgcn_t"}) {
        CHECK(run_cli("train --dataset " + base + "/split --out " + base + "/run_" + variant +
                      " --dim 8 --max-epochs 2 --patience 5 --variant " + variant +
                      " --lambda_s 0.2") == 0);
        CHECK(fs::exists(root / ("run_" + variant) / "checkpoint.ckpt"));
    }
    fs::remove_all(root);
}

TEST_CASE("cli surfaces clean errors") {
    const fs::path root = fs::temp_directory_path() / "swgcn_cli_err";
    fs::remove_all(root);
    fs::create_directories(root);
    CHECK(run_cli("eval --checkpoint " + root.string() + "/missing.ckpt --dataset " +
                  root.string() + " --out " + root.string()) != 0);
    CHECK(run_cli("train --out " + root.string()) != 0);  // --dataset required
    fs::remove_all(root);
}

#endif // SWGCN_CLI_PATH
