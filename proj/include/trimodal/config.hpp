#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trimodal/dataset.hpp"
#include "trimodal/model.hpp"
#include "trimodal/optim.hpp"

namespace trimodal {

struct TrainConfig {
    ModelConfig model;
    SyntheticSpec data;     // used when data_dir is empty
    std::string data_dir;   // directory written by save_dataset
    AdamWOptions optim{.lr = 1e-4, .weight_decay = 0.01};
    std::size_t batch_size = 16;
    std::size_t epochs = 15;
    std::size_t steps = 0;  // nonzero overrides epochs
    std::uint64_t seed = 7; // model init and batch order
    std::string checkpoint_path;
    std::string loss_log_path;

    // steps, or epochs * (n_train / batch_size) with the last partial batch dropped.
    std::size_t total_steps(std::size_t n_train) const;
    // Propagates shared widths and checks positivity; throws ContractError.
    void validate();
};

// Small widths for single-core runs: d = 128, P = 16, K = 8, 128 sampled
// Gaussians, batch 16, 500 steps.
TrainConfig toy_config();

struct ConfigKey {
    std::string key;
    std::string doc;
};
const std::vector<ConfigKey>& config_keys();

// Flat `key = value` text, `#` starts a comment. Keys absent from the text
// keep the values of `base`; an unknown key or bad value raises FormatError
// naming the line.
TrainConfig parse_config(const std::string& text, const TrainConfig& base = TrainConfig{});
TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base = TrainConfig{});
// Every key with its current value, one per line. parse_config(to_text(c)) == c.
std::string config_to_text(const TrainConfig& cfg);

// TIGA_SEED, when set, replaces the training and data seeds.
void apply_seed_override(TrainConfig& cfg);

}  // namespace trimodal
