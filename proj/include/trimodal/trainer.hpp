#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "trimodal/checkpoint.hpp"
#include "trimodal/config.hpp"
#include "trimodal/dataset.hpp"
#include "trimodal/model.hpp"

namespace trimodal {

struct LossRow {
    std::uint64_t step = 0;
    double loss = 0.0;
    double loss_text = 0.0;
    double loss_image = 0.0;
    double tau = 0.0;
};

struct TrainState {
    ParamSet params;
    AdamState adam;
    std::uint64_t step = 0;
};

TriModalDataset load_training_data(const TrainConfig& cfg);

std::vector<PreparedSample> prepare_samples(const std::vector<TriModalSample>& samples, const ModelConfig& cfg,
                                            const StubTeacher& teacher);

TrainState init_train_state(const TrainConfig& cfg);

// Sample indices of the batch taken at `step`: a Fisher-Yates permutation
// seeded from (seed, epoch), cut into full batches.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n_samples, std::size_t batch_size,
                                       std::uint64_t step);

// Advances `state` up to `until_step` (exclusive), one optimizer step per
// batch. Calls `on_step` after every update. A non-finite loss raises
// NumericError with the step index and every parameter norm.
void train_steps(TrainState& state, const TrainConfig& cfg, std::span<const PreparedSample> samples,
                 std::uint64_t until_step, const std::function<void(const LossRow&)>& on_step = {});

struct TrainResult {
    TrainState state;
    std::vector<LossRow> log;
};

// Full run: data, preparation, init (or `resume`), loop, then the loss CSV
// and checkpoint when their paths are configured.
TrainResult train(const TrainConfig& cfg, const Checkpoint* resume = nullptr);

Checkpoint make_checkpoint(const TrainConfig& cfg, const TrainState& state);
TrainState state_from_checkpoint(const Checkpoint& ckpt);

std::string loss_log_csv(std::span<const LossRow> rows);
void write_loss_log(std::span<const LossRow> rows, const std::filesystem::path& path);

}  // namespace trimodal
