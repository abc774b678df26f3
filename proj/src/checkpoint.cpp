#include "triagelab/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "triagelab/errors.hpp"

namespace triagelab {

namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'T', 'L', 'C', 'K', 'P', 'T', '0', '1'};

json dims_to_json(const ModelDims& d) {
    return json{{"d_model", d.d_model},   {"n_layers", d.n_layers},
                {"n_heads", d.n_heads},   {"d_ff", d.d_ff},
                {"vocab_size", d.vocab_size}, {"max_seq_len", d.max_seq_len}};
}

ModelDims dims_from_json(const json& j) {
    ModelDims d;
    d.d_model = j.at("d_model");
    d.n_layers = j.at("n_layers");
    d.n_heads = j.at("n_heads");
    d.d_ff = j.at("d_ff");
    d.vocab_size = j.at("vocab_size");
    d.max_seq_len = j.at("max_seq_len");
    return d;
}

json config_to_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"eps", c.eps},
                {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"seed", c.seed},
                {"shuffle_each_epoch", c.shuffle_each_epoch}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate");
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.eps = j.at("eps");
    c.weight_decay = j.at("weight_decay");
    c.batch_size = j.at("batch_size");
    c.epochs = j.at("epochs");
    c.seed = j.at("seed");
    c.shuffle_each_epoch = j.at("shuffle_each_epoch");
    return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json header;
    header["version"] = 1;
    header["dims"] = dims_to_json(ckpt.params.dims);
    header["dataset"] = ckpt.dataset_name;
    header["vocab_hash"] = ckpt.vocab_hash;
    header["step"] = ckpt.step;
    header["diverged"] = ckpt.diverged;
    header["config"] = config_to_json(ckpt.config);
    header["class_ids"] = ckpt.head.source_token_ids;
    json tensors = json::array();
    for (const auto& t : ckpt.params.tensors) {
        tensors.push_back(json{{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
    }
    header["tensors"] = tensors;
    json history = json::array();
    for (const auto& p : ckpt.loss_history) {
        history.push_back(json::array({p.step, p.loss}));
    }
    header["loss_history"] = history;

    const std::string head_bytes = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out.write(kMagic, sizeof(kMagic));
    const uint64_t len = head_bytes.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head_bytes.data(), static_cast<std::streamsize>(head_bytes.size()));
    for (const auto& t : ckpt.params.tensors) {
        out.write(reinterpret_cast<const char*>(t.w.data()),
                  static_cast<std::streamsize>(t.w.size() * sizeof(float)));
    }
    out.write(reinterpret_cast<const char*>(ckpt.head.w.data()),
              static_cast<std::streamsize>(ckpt.head.w.size() * sizeof(float)));
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError(path + ": not a checkpoint file (bad magic)");
    }
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (1ULL << 30)) {
        throw ParseError(path + ": corrupt header length");
    }
    std::string head_bytes(len, '\0');
    in.read(head_bytes.data(), static_cast<std::streamsize>(len));
    if (!in) {
        throw ParseError(path + ": truncated header");
    }
    json header = json::parse(head_bytes, nullptr, false);
    if (header.is_discarded()) {
        throw ParseError(path + ": header is not valid JSON");
    }
    if (header.at("version").get<int>() != 1) {
        throw ParseError(path + ": unsupported checkpoint version");
    }

    Checkpoint ckpt;
    const ModelDims dims = dims_from_json(header.at("dims"));
    ckpt.params = init_params<float>(dims, 0);
    ckpt.dataset_name = header.at("dataset");
    ckpt.vocab_hash = header.at("vocab_hash");
    ckpt.step = header.at("step");
    ckpt.diverged = header.at("diverged");
    ckpt.config = config_from_json(header.at("config"));
    for (const auto& p : header.at("loss_history")) {
        ckpt.loss_history.push_back({p.at(0).get<int>(), p.at(1).get<double>()});
    }

    const json& tensors = header.at("tensors");
    if (tensors.size() != ckpt.params.tensors.size()) {
        throw ParseError(path + ": tensor directory does not match the declared dims");
    }
    for (size_t i = 0; i < ckpt.params.tensors.size(); ++i) {
        auto& t = ckpt.params.tensors[i];
        const json& meta = tensors[i];
        if (meta.at("name") != t.name || meta.at("rows") != t.rows || meta.at("cols") != t.cols) {
            throw ParseError(path + ": tensor " + std::to_string(i) +
                             " does not match the expected layout (" + t.name + ")");
        }
        in.read(reinterpret_cast<char*>(t.w.data()),
                static_cast<std::streamsize>(t.w.size() * sizeof(float)));
        if (!in) {
            throw ParseError(path + ": truncated tensor data at " + t.name);
        }
    }

    std::array<int, 2> class_ids{};
    header.at("class_ids").get_to(class_ids);
    ckpt.head = make_restricted_head(ckpt.params, class_ids);
    // the stored rows are authoritative (identical to the merged-back ones)
    in.read(reinterpret_cast<char*>(ckpt.head.w.data()),
            static_cast<std::streamsize>(ckpt.head.w.size() * sizeof(float)));
    if (!in) {
        throw ParseError(path + ": truncated restricted head data");
    }
    return ckpt;
}

void save_loss_history_csv(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << "step,loss\n";
    char buf[64];
    for (const auto& p : ckpt.loss_history) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g\n", p.step, p.loss);
        out << buf;
    }
}

}  // namespace triagelab
