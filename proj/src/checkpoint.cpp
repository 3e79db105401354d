#include "swgcn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "swgcn/error.hpp"

namespace swgcn {

namespace {

constexpr char kMagic[8] = {'S', 'W', 'G', 'C', 'N', 'C', 'K', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const nlohmann::json& hyper, std::uint64_t seed) {
    nlohmann::json header;
    header["format_version"] = 1;
    header["code_version"] = kVersion;
    header["seed"] = seed;
    header["hyper"] = hyper;
    header["num_users"] = params.num_users;
    header["num_items"] = params.num_items;
    header["dim"] = params.dim;
    header["num_behaviors"] = params.num_behaviors;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, m] : params.tensors())
        tensors.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
    header["tensors"] = tensors;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::string header_text = header.dump();
    write_u64(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, m] : params.tensors())
        out.write(reinterpret_cast<const char*>(m->data()),
                  static_cast<std::streamsize>(m->size() * sizeof(double)));
    if (!out) throw Error("io", "failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw Error("parse", path + " is not a checkpoint file");

    const std::uint64_t header_size = read_u64(in);
    std::string header_text(header_size, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_size));
    if (!in) throw Error("parse", "truncated checkpoint header in " + path);
    const auto header = nlohmann::json::parse(header_text);

    Checkpoint ckpt;
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.hyper = header.value("hyper", nlohmann::json::object());

    ModelParams& p = ckpt.params;
    p.num_users = header.at("num_users").get<int>();
    p.num_items = header.at("num_items").get<int>();
    p.dim = header.at("dim").get<int>();
    p.num_behaviors = header.at("num_behaviors").get<int>();
    p.embeddings.assign(p.num_behaviors, Matrix());
    p.weigher.assign(p.num_behaviors, Matrix());

    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::size_t rows = entry.at("rows").get<std::size_t>();
        const std::size_t cols = entry.at("cols").get<std::size_t>();
        Matrix m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!in) throw Error("parse", "truncated tensor '" + name + "' in " + path);

        if (name.rfind("embedding.", 0) == 0)
            p.embeddings[std::stoi(name.substr(10))] = std::move(m);
        else if (name.rfind("weigher.", 0) == 0)
            p.weigher[std::stoi(name.substr(8))] = std::move(m);
        else if (name == "attn.query")
            p.attn_query = std::move(m);
        else if (name == "attn.key")
            p.attn_key = std::move(m);
        else if (name == "attn.value")
            p.attn_value = std::move(m);
        else
            throw Error("parse", "unknown tensor '" + name + "' in " + path);
    }
    return ckpt;
}

} // namespace swgcn
