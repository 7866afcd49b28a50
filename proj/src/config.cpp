#include "trimodal/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "trimodal/errors.hpp"

namespace trimodal {

std::size_t TrainConfig::total_steps(std::size_t n_train) const {
    if (steps > 0) return steps;
    return epochs * (n_train / batch_size);
}

void TrainConfig::validate() {
    model.sync();
    if (batch_size == 0) throw ContractError("config: train.batch_size must be positive");
    if (steps == 0 && epochs == 0) throw ContractError("config: one of train.steps or train.epochs must be positive");
    if (!(optim.lr >= 0.0)) throw ContractError("config: train.lr must be >= 0");
    if (data.dim != model.dim() && data_dir.empty()) {
        throw ContractError("config: data.dim (" + std::to_string(data.dim) + ") differs from model.dim (" +
                            std::to_string(model.dim()) + ")");
    }
    if (model.projector.layers == 0 || model.projector.queries == 0) {
        throw ContractError("config: proj.layers and proj.queries must be positive");
    }
}

TrainConfig toy_config() {
    TrainConfig c;
    auto& t = c.model.tokenizer;
    t.sample_count = 128;
    t.patch_count = 16;
    t.patch_size = 8;
    t.spatial_widths = {32, 64, 64};
    t.opacity_widths = {16, 16, 16};
    t.color_widths = {16, 32, 32};
    t.scale_widths = {16, 32, 32};
    t.rotation_widths = {16, 32, 32};
    t.fused_width = 64;
    t.blocks = 1;
    t.heads = 4;
    t.mlp_ratio = 2;
    t.embed_dim = 128;
    c.model.teacher.hidden = 32;
    c.model.teacher.width = 64;
    c.model.projector.layers = 6;
    c.model.projector.queries = 8;
    c.model.projector.heads = 4;
    c.model.projector.mlp_ratio = 2;
    c.data.dim = 128;
    c.steps = 500;
    c.batch_size = 16;
    c.model.sync();
    return c;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

struct BadValue {
    std::string why;
};

std::uint64_t to_u64(const std::string& s) {
    if (s.empty() || s[0] == '-') throw BadValue{"expected a non-negative integer"};
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &pos, 0);
    } catch (const std::exception&) {
        throw BadValue{"expected a non-negative integer"};
    }
    if (pos != s.size()) throw BadValue{"expected a non-negative integer"};
    return v;
}

double to_double(const std::string& s) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw BadValue{"expected a number"};
    }
    if (pos != s.size()) throw BadValue{"expected a number"};
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw BadValue{"expected true or false"};
}

std::vector<std::size_t> to_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw BadValue{"empty list entry"};
        out.push_back(to_u64(item.substr(b, e - b + 1)));
    }
    if (out.size() != 3) throw BadValue{"expected three comma-separated widths"};
    return out;
}

struct Entry {
    ConfigKey meta;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

#define SIZE_KEY(name, field, doc)                                                                    \
    Entry {                                                                                           \
        {name, doc}, [](TrainConfig& c, const std::string& v) { c.field = to_u64(v); },              \
            [](const TrainConfig& c) { return std::to_string(c.field); }                             \
    }
#define DOUBLE_KEY(name, field, doc)                                                                  \
    Entry {                                                                                           \
        {name, doc}, [](TrainConfig& c, const std::string& v) { c.field = to_double(v); },           \
            [](const TrainConfig& c) { return fmt_double(c.field); }                                 \
    }
#define BOOL_KEY(name, field, doc)                                                                    \
    Entry {                                                                                           \
        {name, doc}, [](TrainConfig& c, const std::string& v) { c.field = to_bool(v); },             \
            [](const TrainConfig& c) { return std::string(c.field ? "true" : "false"); }             \
    }
#define LIST_KEY(name, field, doc)                                                                    \
    Entry {                                                                                           \
        {name, doc}, [](TrainConfig& c, const std::string& v) { c.field = to_list(v); },             \
            [](const TrainConfig& c) { return fmt_list(c.field); }                                   \
    }
#define STRING_KEY(name, field, doc)                                                                  \
    Entry {                                                                                           \
        {name, doc}, [](TrainConfig& c, const std::string& v) { c.field = v; },                      \
            [](const TrainConfig& c) { return c.field; }                                             \
    }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table{
        SIZE_KEY("seed", seed, "model initialization and batch order"),
        STRING_KEY("data.dir", data_dir, "dataset directory; empty generates the synthetic set in memory"),
        SIZE_KEY("data.seed", data.seed, "synthetic generator seed"),
        SIZE_KEY("data.classes", data.classes, "synthetic class count"),
        SIZE_KEY("data.train_per_class", data.train_per_class, "synthetic training objects per class"),
        SIZE_KEY("data.test_per_class", data.test_per_class, "synthetic held-out objects per class"),
        SIZE_KEY("data.gaussians", data.gaussians, "Gaussians per synthetic object"),
        SIZE_KEY("data.dim", data.dim, "synthetic embedding width"),
        SIZE_KEY("data.views", data.views, "rendered views per object (N)"),
        DOUBLE_KEY("data.text_noise", data.text_noise, "norm of per-sample text noise"),
        DOUBLE_KEY("data.view_noise", data.view_noise, "norm of per-view noise"),
        DOUBLE_KEY("data.twin_strength", data.twin_strength, "look-alike class weight near azimuth 0"),
        DOUBLE_KEY("data.ring_strength", data.ring_strength, "class-independent azimuth term weight"),
        SIZE_KEY("model.dim", model.tokenizer.embed_dim, "shared embedding width d (even)"),
        BOOL_KEY("model.view_fusion", model.view_fusion, "fuse multi-view features; false aligns to the anchor"),
        BOOL_KEY("model.text_projector", model.text_projector, "text projector; false uses F_G^I as F_G^T"),
        BOOL_KEY("model.positional_encoding", model.fusion.positional_encoding, "azimuth encoding on views"),
        SIZE_KEY("tok.sample_count", model.tokenizer.sample_count, "FPS sample count"),
        SIZE_KEY("tok.patches", model.tokenizer.patch_count, "patch count P"),
        SIZE_KEY("tok.patch_size", model.tokenizer.patch_size, "Gaussians per patch K"),
        LIST_KEY("tok.spatial_widths", model.tokenizer.spatial_widths, "position MLP widths"),
        LIST_KEY("tok.opacity_widths", model.tokenizer.opacity_widths, "opacity MLP widths"),
        LIST_KEY("tok.color_widths", model.tokenizer.color_widths, "color MLP widths"),
        LIST_KEY("tok.scale_widths", model.tokenizer.scale_widths, "scale MLP widths"),
        LIST_KEY("tok.rotation_widths", model.tokenizer.rotation_widths, "rotation MLP widths"),
        SIZE_KEY("tok.fused_width", model.tokenizer.fused_width, "patch token width"),
        SIZE_KEY("tok.blocks", model.tokenizer.blocks, "teacher-guidance blocks"),
        SIZE_KEY("tok.heads", model.tokenizer.heads, "attention heads in guidance blocks"),
        SIZE_KEY("tok.mlp_ratio", model.tokenizer.mlp_ratio, "guidance MLP expansion"),
        DOUBLE_KEY("tok.ln_eps", model.tokenizer.ln_eps, "layer-norm epsilon in the tokenizer"),
        SIZE_KEY("teacher.hidden", model.teacher.hidden, "stub teacher hidden width"),
        SIZE_KEY("teacher.width", model.teacher.width, "teacher feature width"),
        SIZE_KEY("teacher.seed", model.teacher.seed, "stub teacher weights seed"),
        SIZE_KEY("proj.layers", model.projector.layers, "projector layers L"),
        SIZE_KEY("proj.queries", model.projector.queries, "learnable queries N_q"),
        SIZE_KEY("proj.heads", model.projector.heads, "projector attention heads"),
        SIZE_KEY("proj.mlp_ratio", model.projector.mlp_ratio, "projector MLP expansion"),
        BOOL_KEY("proj.patch_context", model.projector.patch_context, "attend to patch tokens"),
        DOUBLE_KEY("loss.lambda_text", model.loss.lambda_text, "weight of the 3D-text term"),
        DOUBLE_KEY("loss.lambda_image", model.loss.lambda_image, "weight of the 3D-image term"),
        BOOL_KEY("loss.symmetric", model.loss.symmetric, "average both InfoNCE directions"),
        DOUBLE_KEY("loss.temperature", model.loss.init_temperature, "initial temperature"),
        DOUBLE_KEY("train.lr", optim.lr, "AdamW learning rate"),
        DOUBLE_KEY("train.weight_decay", optim.weight_decay, "decoupled weight decay on matrices"),
        DOUBLE_KEY("train.beta1", optim.beta1, "first-moment decay"),
        DOUBLE_KEY("train.beta2", optim.beta2, "second-moment decay"),
        DOUBLE_KEY("train.eps", optim.eps, "AdamW epsilon"),
        SIZE_KEY("train.batch_size", batch_size, "objects per step"),
        SIZE_KEY("train.epochs", epochs, "epochs when train.steps is 0"),
        SIZE_KEY("train.steps", steps, "optimizer steps; 0 derives from epochs"),
        STRING_KEY("train.checkpoint", checkpoint_path, "checkpoint file written at the end"),
        STRING_KEY("train.loss_log", loss_log_path, "per-step loss CSV"),
    };
    return table;
}

#undef SIZE_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY
#undef LIST_KEY
#undef STRING_KEY

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& e : entries()) out.push_back(e.meta);
        return out;
    }();
    return keys;
}

TrainConfig parse_config(const std::string& text, const TrainConfig& base) {
    TrainConfig cfg = base;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const Entry* entry = nullptr;
        for (const auto& e : entries()) {
            if (e.meta.key == key) entry = &e;
        }
        if (!entry) throw FormatError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        try {
            entry->set(cfg, value);
        } catch (const BadValue& bad) {
            throw FormatError("config line " + std::to_string(lineno) + ": " + key + " = '" + value + "': " +
                              bad.why);
        }
    }
    return cfg;
}

TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
    std::ifstream in(path);
    if (!in) throw LookupError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), base);
}

std::string config_to_text(const TrainConfig& cfg) {
    std::string out;
    for (const auto& e : entries()) out += e.meta.key + " = " + e.get(cfg) + "\n";
    return out;
}

void apply_seed_override(TrainConfig& cfg) {
    const char* env = std::getenv("TIGA_SEED");
    if (!env || !*env) return;
    try {
        const std::uint64_t s = to_u64(env);
        cfg.seed = s;
        cfg.data.seed = s;
    } catch (const BadValue&) {
        throw FormatError(std::string("TIGA_SEED='") + env + "' is not a non-negative integer");
    }
}

}  // namespace trimodal
