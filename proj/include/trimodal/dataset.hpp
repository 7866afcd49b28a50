#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trimodal/gaussian.hpp"
#include "trimodal/view_fusion.hpp"

namespace trimodal {

struct TriModalSample {
    std::string id;  // "<class name>/<split>_<index>"
    GaussianCloud cloud;
    std::vector<double> text;  // unit F_T
    ViewSet views;             // unit anchor and views
    std::size_t label = 0;
};

// Knobs of the procedural generator. Each class gets a shape template, a
// color/scale/opacity profile, a text vector t_c and a view vector v_c.
struct SyntheticSpec {
    std::size_t classes = 8;
    std::size_t train_per_class = 25;
    std::size_t test_per_class = 20;
    std::size_t gaussians = 128;
    std::size_t dim = 128;
    std::size_t views = 6;
    double text_noise = 0.1;      // norm of the per-sample text perturbation
    double view_noise = 0.1;      // norm of the per-view perturbation
    double twin_strength = 1.5;   // peak weight of the look-alike class vector near azimuth 0
    double ring_strength = 0.5;   // weight of the class-independent azimuth term
    std::uint64_t seed = 1;
};

struct TriModalDataset {
    std::size_t dim = 0;
    std::vector<std::string> class_names;
    std::vector<std::vector<double>> class_text;  // clean t_c, unit
    std::vector<TriModalSample> train;
    std::vector<TriModalSample> test;
};

const std::vector<std::string>& template_names();

// Template k (cycled) sampled with n points in its canonical frame before jitter.
GaussianCloud shape_template(std::size_t template_index, std::size_t n, std::uint64_t seed);

TriModalDataset generate_synthetic(const SyntheticSpec& spec);

// n_classes * samples_per_class training samples, labels in class-major order.
std::vector<TriModalSample> generate_synthetic_dataset(std::size_t n_classes, std::size_t samples_per_class,
                                                       std::size_t gaussians_per_object, std::uint64_t seed);

// Directory layout: train.tigs / test.tigs (clouds), train.tige / test.tige
// (text, image anchor, views) and classes.tige (one text record per class).
void save_dataset(const TriModalDataset& data, const std::filesystem::path& dir);
TriModalDataset load_dataset(const std::filesystem::path& dir);

// Class name of an id of the form "<class>/<rest>"; the whole id otherwise.
std::string class_of(const std::string& id);

}  // namespace trimodal
