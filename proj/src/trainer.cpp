#include "trimodal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "trimodal/errors.hpp"

namespace trimodal {

TriModalDataset load_training_data(const TrainConfig& cfg) {
    if (!cfg.data_dir.empty()) {
        TriModalDataset data = load_dataset(cfg.data_dir);
        if (data.dim != cfg.model.dim()) {
            throw FormatError("dataset width " + std::to_string(data.dim) + " differs from model.dim " +
                              std::to_string(cfg.model.dim()));
        }
        return data;
    }
    return generate_synthetic(cfg.data);
}

std::vector<PreparedSample> prepare_samples(const std::vector<TriModalSample>& samples, const ModelConfig& cfg,
                                            const StubTeacher& teacher) {
    std::vector<PreparedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(prepare_sample(s.id, s.label, s.cloud, s.text, s.views, cfg, teacher));
    return out;
}

TrainState init_train_state(const TrainConfig& cfg) {
    TrainState s;
    s.params = init_model(cfg.model, cfg.seed);
    return s;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n_samples, std::size_t batch_size,
                                       std::uint64_t step) {
    const std::size_t per_epoch = n_samples / batch_size;
    if (per_epoch == 0) {
        throw ContractError("training set of " + std::to_string(n_samples) + " objects is smaller than one batch of " +
                            std::to_string(batch_size));
    }
    const std::uint64_t epoch = step / per_epoch, slot = step % per_epoch;
    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
    std::shuffle(order.begin(), order.end(), rng);
    return {order.begin() + static_cast<std::ptrdiff_t>(slot * batch_size),
            order.begin() + static_cast<std::ptrdiff_t>((slot + 1) * batch_size)};
}

namespace {

std::string norm_report(const ParamSet& ps) {
    std::string out;
    for (const auto& [name, t] : ps) {
        double s = 0.0;
        for (double v : t.values) s += v * v;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", std::sqrt(s));
        out += "\n  " + name + " |p| = " + buf;
    }
    return out;
}

}  // namespace

void train_steps(TrainState& state, const TrainConfig& cfg, std::span<const PreparedSample> samples,
                 std::uint64_t until_step, const std::function<void(const LossRow&)>& on_step) {
    while (state.step < until_step) {
        const auto idx = batch_indices(cfg.seed, samples.size(), cfg.batch_size, state.step);
        std::vector<const PreparedSample*> batch;
        batch.reserve(idx.size());
        for (std::size_t i : idx) batch.push_back(&samples[i]);

        state.params.zero_grad();
        Tape tape;
        BatchForward f = forward_batch(tape, state.params, cfg.model, batch);
        LossRow row;
        row.step = state.step;
        row.loss = f.loss.total.item();
        row.loss_text = f.loss.text.item();
        row.loss_image = f.loss.image.item();
        row.tau = temperature(state.params);
        if (!std::isfinite(row.loss)) {
            throw NumericError("non-finite loss at step " + std::to_string(state.step) + "; parameter norms:" +
                               norm_report(state.params));
        }
        tape.backward(f.loss.total);
        adamw_step(state.params, state.adam, cfg.optim);
        clamp_temperature(state.params);
        ++state.step;
        if (on_step) on_step(row);
    }
}

Checkpoint make_checkpoint(const TrainConfig& cfg, const TrainState& state) {
    Checkpoint c;
    c.config_text = config_to_text(cfg);
    c.step = state.step;
    c.params = state.params;
    c.adam = state.adam;
    return c;
}

TrainState state_from_checkpoint(const Checkpoint& ckpt) {
    TrainState s;
    s.params = ckpt.params;
    s.adam = ckpt.adam;
    s.step = ckpt.step;
    return s;
}

TrainResult train(const TrainConfig& cfg_in, const Checkpoint* resume) {
    TrainConfig cfg = cfg_in;
    cfg.validate();
    const TriModalDataset data = load_training_data(cfg);
    const StubTeacher teacher(cfg.model.teacher);
    const std::vector<PreparedSample> samples = prepare_samples(data.train, cfg.model, teacher);

    TrainResult result;
    result.state = resume ? state_from_checkpoint(*resume) : init_train_state(cfg);
    const std::uint64_t total = cfg.total_steps(samples.size());
    train_steps(result.state, cfg, samples, total, [&](const LossRow& r) { result.log.push_back(r); });

    if (!cfg.loss_log_path.empty()) write_loss_log(result.log, cfg.loss_log_path);
    if (!cfg.checkpoint_path.empty()) save_checkpoint(make_checkpoint(cfg, result.state), cfg.checkpoint_path);
    return result;
}

std::string loss_log_csv(std::span<const LossRow> rows) {
    std::string out = "step,loss,loss_text,loss_image,tau\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(r.step),
                      r.loss, r.loss_text, r.loss_image, r.tau);
        out += buf;
    }
    return out;
}

void write_loss_log(std::span<const LossRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write loss log " + path.string());
    out << loss_log_csv(rows);
}

}  // namespace trimodal
