#include "trimodal/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>

#include "trimodal/errors.hpp"
#include "trimodal/shard.hpp"
#include "trimodal/store.hpp"

namespace trimodal {

namespace {

using Rng = std::mt19937_64;
constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::vector<double> unit_gaussian(Rng& rng, std::size_t d) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(d);
    double s = 0.0;
    for (auto& x : v) {
        x = n(rng);
        s += x * x;
    }
    s = std::sqrt(s);
    for (auto& x : v) x /= s;
    return v;
}

void normalize(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    for (auto& x : v) x /= s;
}

// v += w * u
void axpy(std::vector<double>& v, double w, const std::vector<double>& u) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += w * u[i];
}

void add_noise(std::vector<double>& v, double norm, Rng& rng) {
    if (norm <= 0.0) return;
    std::normal_distribution<double> n(0.0, norm / std::sqrt(static_cast<double>(v.size())));
    for (auto& x : v) x += n(rng);
}

Quat random_rotation(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Quat q{n(rng), n(rng), n(rng), n(rng)};
    const double s = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    for (auto& x : q) x /= s;
    return q;
}

Vec3 hsv(double h, double s, double v) {
    const double hh = std::fmod(h, 1.0) * 6.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

Vec3 template_point(std::size_t kind, Rng& rng) {
    switch (kind % 8) {
        case 0: {  // sphere shell
            std::normal_distribution<double> n(0.0, 1.0);
            Vec3 p{n(rng), n(rng), n(rng)};
            const double s = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            return {p[0] / s, p[1] / s, p[2] / s};
        }
        case 1: {  // box surface, 1 x 0.7 x 0.5 half extents
            const Vec3 half{1.0, 0.7, 0.5};
            const int face = static_cast<int>(uniform(rng, 0, 6));
            Vec3 p{uniform(rng, -1, 1) * half[0], uniform(rng, -1, 1) * half[1], uniform(rng, -1, 1) * half[2]};
            p[face / 2] = (face % 2 ? 1.0 : -1.0) * half[face / 2];
            return p;
        }
        case 2: {  // torus
            const double a = uniform(rng, 0, 2 * kPi), b = uniform(rng, 0, 2 * kPi);
            return {(1.0 + 0.3 * std::cos(b)) * std::cos(a), (1.0 + 0.3 * std::cos(b)) * std::sin(a),
                    0.3 * std::sin(b)};
        }
        case 3: {  // open cylinder
            const double a = uniform(rng, 0, 2 * kPi);
            return {0.5 * std::cos(a), 0.5 * std::sin(a), uniform(rng, -1, 1)};
        }
        case 4: {  // cone side
            const double a = uniform(rng, 0, 2 * kPi), h = std::sqrt(uniform(rng, 0, 1));
            return {h * std::cos(a), h * std::sin(a), 1.5 * (1.0 - h) - 0.75};
        }
        case 5:  // thin square plate
            return {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -0.02, 0.02)};
        case 6: {  // helix tube
            const double t = uniform(rng, 0, 4 * kPi), a = uniform(rng, 0, 2 * kPi);
            return {std::cos(t) + 0.08 * std::cos(a), std::sin(t) + 0.08 * std::sin(a),
                    t / (2 * kPi) - 1.0 + 0.08 * std::sin(a + t)};
        }
        default: {  // planar cross of two bars
            const double u = uniform(rng, -1, 1), w = uniform(rng, -0.15, 0.15), z = uniform(rng, -0.15, 0.15);
            return uniform(rng, 0, 1) < 0.5 ? Vec3{u, w, z} : Vec3{w, u, z};
        }
    }
}

struct ClassProfile {
    std::size_t shape = 0;
    Vec3 color{};
    double opacity = 0.5;
    double log_scale = -3.0;
};

ClassProfile class_profile(std::size_t c, std::size_t classes) {
    ClassProfile p;
    p.shape = c % 8;
    const double frac = static_cast<double>(c) / static_cast<double>(classes);
    p.color = hsv(frac, 0.75, 0.85);
    p.opacity = 0.35 + 0.55 * static_cast<double>((c * 5) % classes) / static_cast<double>(classes);
    p.log_scale = -4.0 + 1.5 * static_cast<double>((c * 3) % classes) / static_cast<double>(classes);
    return p;
}

GaussianCloud make_cloud(const ClassProfile& prof, std::size_t n, Rng& rng) {
    const double yaw = uniform(rng, -kPi / 12, kPi / 12);
    const Vec3 stretch{uniform(rng, 0.9, 1.1), uniform(rng, 0.9, 1.1), uniform(rng, 0.9, 1.1)};
    const Vec3 tint{uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05)};
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    std::normal_distribution<double> jitter(0.0, 0.02);
    GaussianCloud cloud;
    cloud.gaussians.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 p = template_point(prof.shape, rng);
        for (int a = 0; a < 3; ++a) p[a] = p[a] * stretch[a] + jitter(rng);
        Gaussian g;
        g.position = {cy * p[0] - sy * p[1], sy * p[0] + cy * p[1], p[2]};
        g.opacity = std::clamp(prof.opacity + uniform(rng, -0.05, 0.05), 0.0, 1.0);
        for (int a = 0; a < 3; ++a) {
            g.color[a] = std::clamp(prof.color[a] + tint[a] + uniform(rng, -0.03, 0.03), 0.0, 1.0);
            g.scale[a] = std::exp(prof.log_scale + uniform(rng, -0.3, 0.3));
        }
        g.rotation = random_rotation(rng);
        cloud.gaussians.push_back(g);
    }
    return cloud;
}

std::string sample_id(const std::string& cls, const char* split, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04zu", split, i);
    return cls + "/" + buf;
}

}  // namespace

const std::vector<std::string>& template_names() {
    static const std::vector<std::string> names{"sphere", "box", "torus", "cylinder", "cone", "plane", "helix", "cross"};
    return names;
}

GaussianCloud shape_template(std::size_t template_index, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    ClassProfile prof;
    prof.shape = template_index % 8;
    GaussianCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        Gaussian g;
        g.position = template_point(prof.shape, rng);
        g.opacity = prof.opacity;
        g.color = {0.5, 0.5, 0.5};
        g.scale = {0.05, 0.05, 0.05};
        cloud.gaussians.push_back(g);
    }
    return cloud;
}

TriModalDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw ContractError("generate_synthetic: need at least 2 classes");
    if (spec.gaussians == 0 || spec.views == 0 || spec.dim == 0) {
        throw ContractError("generate_synthetic: gaussians, views and dim must be positive");
    }
    Rng rng(spec.seed);
    const std::size_t C = spec.classes, d = spec.dim;

    TriModalDataset data;
    data.dim = d;
    std::vector<std::vector<double>> view_vec(C);
    for (std::size_t c = 0; c < C; ++c) {
        data.class_names.push_back("c" + std::to_string(c) + "_" + template_names()[c % 8]);
        data.class_text.push_back(unit_gaussian(rng, d));
        view_vec[c] = unit_gaussian(rng, d);
    }
    const std::vector<double> ring_u = unit_gaussian(rng, d), ring_v = unit_gaussian(rng, d);
    auto twin = [&](std::size_t c) { return c % 2 == 0 ? (c + 1) % C : c - 1; };
    auto view_at = [&](std::size_t c, double deg, Rng& r) {
        const double phi = deg * kPi / 180.0;
        const double lobe = std::max(0.0, std::cos(phi));
        std::vector<double> v = view_vec[c];
        axpy(v, spec.twin_strength * lobe * lobe, view_vec[twin(c)]);
        axpy(v, spec.ring_strength * std::cos(phi), ring_u);
        axpy(v, spec.ring_strength * std::sin(phi), ring_v);
        add_noise(v, spec.view_noise, r);
        normalize(v);
        return v;
    };
    const std::vector<double> angles = canonical_angles(spec.views);

    auto make_split = [&](const char* split, std::size_t per_class, std::vector<TriModalSample>& out) {
        for (std::size_t c = 0; c < C; ++c) {
            const ClassProfile prof = class_profile(c, C);
            for (std::size_t i = 0; i < per_class; ++i) {
                TriModalSample s;
                s.id = sample_id(data.class_names[c], split, i);
                s.label = c;
                s.cloud = make_cloud(prof, spec.gaussians, rng);
                s.text = data.class_text[c];
                add_noise(s.text, spec.text_noise, rng);
                normalize(s.text);
                s.views.angles_deg = angles;
                for (double a : angles) s.views.views.push_back(view_at(c, a, rng));
                s.views.anchor = view_at(c, uniform(rng, 0.0, 360.0), rng);
                out.push_back(std::move(s));
            }
        }
    };
    make_split("train", spec.train_per_class, data.train);
    make_split("test", spec.test_per_class, data.test);
    return data;
}

std::vector<TriModalSample> generate_synthetic_dataset(std::size_t n_classes, std::size_t samples_per_class,
                                                       std::size_t gaussians_per_object, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.classes = n_classes;
    spec.train_per_class = samples_per_class;
    spec.test_per_class = 0;
    spec.gaussians = gaussians_per_object;
    spec.seed = seed;
    return generate_synthetic(spec).train;
}

std::string class_of(const std::string& id) {
    const auto slash = id.find('/');
    return slash == std::string::npos ? id : id.substr(0, slash);
}

namespace {

void save_split(const std::vector<TriModalSample>& samples, std::size_t dim, const std::filesystem::path& dir,
                const std::string& split) {
    std::vector<ShardObject> shard;
    EmbeddingStore store(static_cast<std::uint32_t>(dim));
    for (const auto& s : samples) {
        shard.push_back({s.id, s.cloud});
        store.add(s.id, Modality::text, s.text);
        append_view_set(store, s.id, s.views);
    }
    save_shard(shard, dir / (split + ".tigs"));
    save_store(store, dir / (split + ".tige"));
}

std::vector<TriModalSample> load_split(const std::filesystem::path& dir, const std::string& split, std::size_t dim,
                                       const std::map<std::string, std::size_t>& labels) {
    const auto shard = load_shard(dir / (split + ".tigs"));
    const EmbeddingStore store = load_store(dir / (split + ".tige"), static_cast<std::uint32_t>(dim));
    std::vector<TriModalSample> out;
    for (const auto& obj : shard) {
        TriModalSample s;
        s.id = obj.id;
        s.cloud = obj.cloud;
        const auto it = labels.find(class_of(obj.id));
        if (it == labels.end()) throw FormatError("dataset: object " + obj.id + " has no class in classes.tige");
        s.label = it->second;
        const EmbeddingRecord* text = store.find(obj.id, Modality::text);
        if (!text) throw FormatError("dataset: object " + obj.id + " has no text embedding in " + split + ".tige");
        s.text = text->values;
        s.views = load_view_embeddings(store, obj.id, dim);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

void save_dataset(const TriModalDataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    EmbeddingStore classes(static_cast<std::uint32_t>(data.dim));
    for (std::size_t c = 0; c < data.class_names.size(); ++c) {
        classes.add(data.class_names[c], Modality::text, data.class_text[c]);
    }
    save_store(classes, dir / "classes.tige");
    save_split(data.train, data.dim, dir, "train");
    save_split(data.test, data.dim, dir, "test");
}

TriModalDataset load_dataset(const std::filesystem::path& dir) {
    const EmbeddingStore classes = load_store(dir / "classes.tige");
    TriModalDataset data;
    data.dim = classes.dim();
    std::map<std::string, std::size_t> labels;
    for (const auto& r : classes.records()) {
        labels.emplace(r.id, data.class_names.size());
        data.class_names.push_back(r.id);
        data.class_text.push_back(r.values);
    }
    if (data.class_names.size() < 2) throw FormatError("dataset: classes.tige must list at least 2 classes");
    data.train = load_split(dir, "train", data.dim, labels);
    if (std::filesystem::exists(dir / "test.tigs")) data.test = load_split(dir, "test", data.dim, labels);
    return data;
}

}  // namespace trimodal
