#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "trimodal/checkpoint.hpp"
#include "trimodal/config.hpp"
#include "trimodal/errors.hpp"
#include "trimodal/eval.hpp"
#include "trimodal/gradsuite.hpp"
#include "trimodal/ply.hpp"
#include "trimodal/shard.hpp"
#include "trimodal/store.hpp"
#include "trimodal/trainer.hpp"

namespace fs = std::filesystem;

namespace trimodal::cli {

namespace {

std::string fmt(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LookupError("cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Modality modality_arg(const std::string& name) {
    auto m = parse_modality(name);
    if (!m) throw ContractError("unknown modality '" + name + "'");
    return *m;
}

struct Labeled {
    std::vector<std::string> ids;
    Embeddings vectors;
    std::vector<std::string> classes;  // class name per record
};

Labeled select(const EmbeddingStore& store, Modality m) {
    Labeled out;
    for (const EmbeddingRecord* r : store.filter(m)) {
        out.ids.push_back(r->id);
        out.vectors.push_back(r->values);
        out.classes.push_back(class_of(r->id));
    }
    if (out.ids.empty()) {
        throw FormatError(std::string("store has no records of modality '") + modality_name(m) + "'");
    }
    return out;
}

// Dense labels over the sorted set of class names.
std::vector<std::size_t> dense_labels(const std::vector<std::string>& classes) {
    std::vector<std::string> uniq = classes;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<std::size_t> out;
    for (const auto& c : classes) {
        out.push_back(static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), c) - uniq.begin()));
    }
    return out;
}

TrainConfig config_from_file(const std::string& path) {
    TrainConfig cfg = load_config(path);
    apply_seed_override(cfg);
    cfg.validate();
    return cfg;
}

int cmd_preprocess(const std::string& ply_dir, const std::string& out_path, std::ostream& out, std::ostream& err) {
    if (!fs::is_directory(ply_dir)) throw LookupError("not a directory: " + ply_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(ply_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".ply") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw LookupError("no .ply files in " + ply_dir);
    std::vector<ShardObject> objects;
    for (const auto& f : files) {
        std::vector<std::string> warnings;
        auto records = read_ply(f, &warnings);
        for (const auto& w : warnings) err << f.filename().string() << ": warning: " << w << "\n";
        objects.push_back({f.stem().string(), activate(records)});
    }
    save_shard(objects, out_path);
    out << "wrote " << objects.size() << " objects to " << out_path << "\n";
    return kOk;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
    const TrainConfig cfg = config_from_file(config_path);
    const TriModalDataset data = generate_synthetic(cfg.data);
    save_dataset(data, out_dir);
    out << "wrote " << data.train.size() << " training and " << data.test.size() << " held-out objects ("
        << data.class_names.size() << " classes, d = " << data.dim << ") to " << out_dir << "\n";
    return kOk;
}

int cmd_train(const std::string& config_path, const std::string& ckpt_path, const std::string& loss_log,
              const std::string& resume, const std::string& metrics_path, std::ostream& out) {
    TrainConfig cfg = config_from_file(config_path);
    cfg.checkpoint_path = ckpt_path;
    if (!loss_log.empty()) cfg.loss_log_path = loss_log;
    std::optional<Checkpoint> start;
    if (!resume.empty()) start = load_checkpoint(resume);
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult res = train(cfg, start ? &*start : nullptr);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!res.log.empty()) {
        const LossRow& last = res.log.back();
        out << "step " << last.step << " loss " << fmt(last.loss) << " tau " << fmt(last.tau) << "\n";
    }
    out << "trained to step " << res.state.step << " in " << fmt(secs, 1) << " s; checkpoint " << ckpt_path
        << "\n";
    if (!metrics_path.empty()) {
        const TriModalDataset data = load_training_data(cfg);
        const StubTeacher teacher(cfg.model.teacher);
        const auto test = prepare_samples(data.test, cfg.model, teacher);
        ParamSet params = res.state.params;
        // Probe only shot counts that leave evaluation items in every class.
        std::vector<std::size_t> per_class(data.class_names.size());
        for (const auto& s : data.test) ++per_class[s.label];
        const std::size_t smallest = *std::min_element(per_class.begin(), per_class.end());
        EvalOptions opt;
        std::erase_if(opt.probe_shots, [&](std::size_t s) { return s >= smallest; });
        const Metrics m = evaluate(params, cfg.model, test, data.class_text, opt);
        write_text(metrics_path, metrics_csv(m));
        for (const auto& [k, v] : m) out << k << " = " << fmt(v) << "\n";
    }
    return kOk;
}

int cmd_embed(const std::string& ckpt_path, const std::string& data_dir, const std::string& out_path,
              const std::string& space, const std::string& split, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrainConfig cfg = parse_config(ckpt.config_text);
    cfg.validate();
    const TriModalDataset data = load_dataset(data_dir);
    if (data.dim != cfg.model.dim()) {
        throw FormatError("dataset width " + std::to_string(data.dim) + " differs from checkpoint width " +
                          std::to_string(cfg.model.dim()));
    }
    const auto& samples = split == "train" ? data.train : data.test;
    if (samples.empty()) throw LookupError("dataset split '" + split + "' is empty");
    const StubTeacher teacher(cfg.model.teacher);
    const auto prepared = prepare_samples(samples, cfg.model, teacher);
    ParamSet params = ckpt.params;
    const SampleEmbeddings emb = embed_samples(params, cfg.model, prepared);
    EmbeddingStore store(static_cast<std::uint32_t>(cfg.model.dim()));
    for (std::size_t i = 0; i < prepared.size(); ++i) {
        if (space == "image") {
            store.add(prepared[i].id, Modality::g3d_image_space, emb.g3d_image[i]);
            store.add(prepared[i].id, Modality::image, emb.image_mv[i]);
        } else {
            store.add(prepared[i].id, Modality::g3d_text_space, emb.g3d_text[i]);
            store.add(prepared[i].id, Modality::text, prepared[i].text);
        }
    }
    save_store(store, out_path);
    out << "wrote " << store.size() << " records (" << prepared.size() << " objects, " << space << " space) to "
        << out_path << "\n";
    return kOk;
}

int cmd_classify(const std::string& store_path, const std::string& classes_path, std::size_t topk,
                 const std::string& out_csv, std::ostream& out) {
    const EmbeddingStore store = load_store(store_path);
    const EmbeddingStore classes = load_store(classes_path, store.dim());
    const Labeled objs = select(store, Modality::g3d_text_space);
    std::vector<std::string> names;
    Embeddings class_vecs;
    for (const auto& r : classes.records()) {
        names.push_back(r.id);
        class_vecs.push_back(r.values);
    }
    if (names.empty()) throw FormatError("classes store is empty");
    std::vector<std::size_t> labels;
    for (const auto& c : objs.classes) {
        const auto it = std::find(names.begin(), names.end(), c);
        if (it == names.end()) throw FormatError("object class '" + c + "' is not listed in " + classes_path);
        labels.push_back(static_cast<std::size_t>(it - names.begin()));
    }
    const auto ranked = zero_shot_classify(objs.vectors, class_vecs, topk);
    std::vector<std::size_t> ks;
    for (std::size_t k : {1, 3, 5}) {
        if (k <= topk) ks.push_back(k);
    }
    const auto acc = topk_accuracy(ranked, labels, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) out << "top" << ks[i] << " = " << fmt(acc[i]) << "\n";
    if (!out_csv.empty()) {
        std::string csv = "id";
        for (std::size_t r = 0; r < std::min(topk, names.size()); ++r) csv += ",rank" + std::to_string(r + 1);
        csv += "\n";
        for (std::size_t i = 0; i < objs.ids.size(); ++i) {
            csv += objs.ids[i];
            for (std::size_t c : ranked[i]) csv += "," + names[c];
            csv += "\n";
        }
        write_text(out_csv, csv);
    }
    return kOk;
}

int cmd_retrieve(const std::string& store_path, const std::string& query_path, std::size_t topk,
                 const std::string& direction, const std::string& out_csv, std::ostream& out) {
    const EmbeddingStore gallery = load_store(store_path);
    const EmbeddingStore queries = load_store(query_path);
    if (gallery.dim() != queries.dim()) {
        throw FormatError("query store width " + std::to_string(queries.dim()) + " differs from gallery width " +
                          std::to_string(gallery.dim()));
    }
    const bool text = direction == "text2gs";
    const Modality gm = text ? Modality::g3d_text_space : Modality::g3d_image_space;
    const Modality qm = text ? Modality::text : Modality::image;
    const Labeled q = select(queries, qm);
    if (gallery.filter(gm).empty()) {
        throw FormatError(std::string("gallery has no records of modality '") + modality_name(gm) + "'");
    }
    std::size_t hits1 = 0, hitsk = 0;
    std::string csv = "query,rank,id,score\n";
    for (std::size_t i = 0; i < q.ids.size(); ++i) {
        const auto res = retrieve(q.vectors[i], gallery, topk, gm);
        for (std::size_t r = 0; r < res.size(); ++r) {
            if (class_of(res[r].id) == q.classes[i]) {
                if (r == 0) ++hits1;
                ++hitsk;
                break;
            }
        }
        for (std::size_t r = 0; r < res.size(); ++r) {
            csv += q.ids[i] + "," + std::to_string(r + 1) + "," + res[r].id + "," + fmt(res[r].score, 9) + "\n";
        }
    }
    const double n = static_cast<double>(q.ids.size());
    out << "queries = " << q.ids.size() << "\n";
    out << "recall@1 = " << fmt(hits1 / n) << "\n";
    out << "recall@" << topk << " = " << fmt(hitsk / n) << "\n";
    if (!out_csv.empty()) write_text(out_csv, csv);
    return kOk;
}

std::vector<std::size_t> parse_shots(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            const long v = std::stol(item, &pos);
            if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ContractError("bad shot count '" + item + "'");
        }
    }
    if (out.empty()) throw ContractError("no shot counts given");
    return out;
}

int cmd_probe(const std::string& store_path, const std::string& shots, std::uint64_t seed, std::size_t repeats,
              const std::string& modality, const std::string& out_csv, std::ostream& out) {
    const EmbeddingStore store = load_store(store_path);
    const Labeled objs = select(store, modality_arg(modality));
    const auto labels = dense_labels(objs.classes);
    ProbeOptions opt;
    opt.repeats = repeats;
    const auto results = few_shot_linear_probe(objs.vectors, labels, parse_shots(shots), seed, opt);
    Metrics m;
    for (const auto& r : results) {
        out << r.shots << "-shot = " << fmt(r.mean_accuracy) << "\n";
        m.emplace_back("probe_" + std::to_string(r.shots) + "shot", r.mean_accuracy);
    }
    if (!out_csv.empty()) write_text(out_csv, metrics_csv(m));
    return kOk;
}

int cmd_simmatrix(const std::string& a_path, const std::string& b_path, const std::string& out_csv,
                  const std::string& ma, const std::string& mb, std::ostream& out) {
    const EmbeddingStore a = load_store(a_path);
    const EmbeddingStore b = load_store(b_path);
    if (a.dim() != b.dim()) {
        throw FormatError("store widths " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()) + " differ");
    }
    auto pick = [](const EmbeddingStore& s, const std::string& m) {
        Labeled l;
        if (m.empty()) {
            for (const auto& r : s.records()) {
                l.ids.push_back(r.id);
                l.vectors.push_back(r.values);
            }
            return l;
        }
        return select(s, modality_arg(m));
    };
    const Labeled la = pick(a, ma), lb = pick(b, mb);
    const SimilarityMatrix sm = similarity_matrix(la.ids, la.vectors, lb.ids, lb.vectors);
    write_text(out_csv, similarity_csv(sm));
    out << "wrote " << la.ids.size() << " x " << lb.ids.size() << " similarity matrix to " << out_csv << "\n";
    return kOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t coords, std::ostream& out) {
    GradSuiteOptions opt;
    opt.coordinates = coords;
    const auto t0 = std::chrono::steady_clock::now();
    const auto reports = run_gradient_suite(seed, opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& r : reports) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-24s coords %4zu  kinks %2zu  max rel err %.3e  %s", r.name.c_str(),
                      r.coordinates, r.skipped, r.max_rel_error, r.max_rel_error <= opt.tolerance ? "ok" : "FAIL");
        out << buf << "\n";
        if (r.max_rel_error > opt.tolerance) out << "  worst: " << r.worst << "\n";
    }
    const bool ok = suite_passed(reports, opt);
    out << (ok ? "gradient suite passed" : "gradient suite FAILED") << " in " << fmt(secs, 2) << " s\n";
    return ok ? kOk : kCheckFailed;
}

int cmd_report(const std::string& dir, const std::string& out_path, std::ostream& out) {
    if (!fs::is_directory(dir)) throw LookupError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, Metrics>> runs;
    for (const auto& f : files) {
        const std::string text = read_text(f);
        if (text.rfind("metric,value", 0) != 0) continue;
        runs.emplace_back(f.stem().string(), parse_metrics_csv(text));
    }
    if (runs.empty()) throw LookupError("no metric CSV files in " + dir);
    const std::string table = metrics_table(runs);
    out << table;
    if (!out_path.empty()) write_text(out_path, table);
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tri-modal 3D Gaussian / image / text alignment toolkit", "trimodal"};
    app.require_subcommand(1);

    std::string ply_dir, out_path, config, ckpt, loss_log, resume, metrics, data_dir, space = "text",
                                                                              split = "test";
    std::string store, classes, query_store, direction = "text2gs", out_csv, shots = "1,2,4,8,16",
                                              modality = "g3d_image_space", store_a, store_b, ma, mb, metrics_dir;
    std::size_t topk = 5, repeats = 10, coords = 120;
    std::uint64_t seed = 0;

    auto* pre = app.add_subcommand("preprocess", "convert a directory of 3DGS PLY files into a shard");
    pre->add_option("--ply-dir", ply_dir, "directory of .ply files")->required();
    pre->add_option("--out", out_path, "output shard (.tigs)")->required();

    auto* syn = app.add_subcommand("synth", "generate the synthetic tri-modal dataset");
    syn->add_option("--config", config, "run config")->required();
    syn->add_option("--out", out_path, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train the alignment model");
    tr->add_option("--config", config, "run config")->required();
    tr->add_option("--out-checkpoint", ckpt, "checkpoint to write")->required();
    tr->add_option("--loss-log", loss_log, "per-step loss CSV");
    tr->add_option("--resume", resume, "checkpoint to continue from");
    tr->add_option("--metrics", metrics, "write held-out metrics CSV");

    auto* em = app.add_subcommand("embed", "embed a dataset split with a checkpoint");
    em->add_option("--checkpoint", ckpt, "checkpoint")->required();
    em->add_option("--data", data_dir, "dataset directory")->required();
    em->add_option("--out-store", out_path, "output store (.tige)")->required();
    em->add_option("--space", space, "embedding space")->check(CLI::IsMember({"image", "text"}));
    em->add_option("--split", split, "dataset split")->check(CLI::IsMember({"train", "test"}));

    auto* cl = app.add_subcommand("classify", "zero-shot classification against class text embeddings");
    cl->add_option("--store", store, "store with g3d_text_space records")->required();
    cl->add_option("--classes", classes, "store with one text record per class")->required();
    cl->add_option("--topk", topk, "ranking depth")->check(CLI::PositiveNumber);
    cl->add_option("--out-csv", out_csv, "write per-object rankings");

    auto* re = app.add_subcommand("retrieve", "cross-modal retrieval against 3D embeddings");
    re->add_option("--store", store, "gallery store")->required();
    re->add_option("--query-store", query_store, "query store")->required();
    re->add_option("--topk", topk, "hits per query")->check(CLI::PositiveNumber);
    re->add_option("--direction", direction, "text2gs or image2gs")->check(CLI::IsMember({"text2gs", "image2gs"}));
    re->add_option("--out-csv", out_csv, "write ranked hits");

    auto* pr = app.add_subcommand("probe", "few-shot linear probe on frozen embeddings");
    pr->add_option("--store", store, "embedding store")->required();
    pr->add_option("--shots", shots, "comma-separated shot counts");
    pr->add_option("--seed", seed, "split seed");
    pr->add_option("--repeats", repeats, "repeats per shot count")->check(CLI::PositiveNumber);
    pr->add_option("--modality", modality, "record modality to probe");
    pr->add_option("--out-csv", out_csv, "write metrics CSV");

    auto* sm = app.add_subcommand("simmatrix", "pairwise cosine similarity between two stores");
    sm->add_option("--store-a", store_a, "row store")->required();
    sm->add_option("--store-b", store_b, "column store")->required();
    sm->add_option("--out-csv", out_csv, "output CSV")->required();
    sm->add_option("--modality-a", ma, "row modality filter");
    sm->add_option("--modality-b", mb, "column modality filter");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gc->add_option("--seed", seed, "suite seed");
    gc->add_option("--coords", coords, "coordinates per component")->check(CLI::PositiveNumber);

    auto* rp = app.add_subcommand("report", "aggregate metric CSVs into a table");
    rp->add_option("--metrics-dir", metrics_dir, "directory of metric CSVs")->required();
    rp->add_option("--out", out_path, "also write the table here");

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (pre->parsed()) return cmd_preprocess(ply_dir, out_path, out, err);
        if (syn->parsed()) return cmd_synth(config, out_path, out);
        if (tr->parsed()) return cmd_train(config, ckpt, loss_log, resume, metrics, out);
        if (em->parsed()) return cmd_embed(ckpt, data_dir, out_path, space, split, out);
        if (cl->parsed()) return cmd_classify(store, classes, topk, out_csv, out);
        if (re->parsed()) return cmd_retrieve(store, query_store, topk, direction, out_csv, out);
        if (pr->parsed()) return cmd_probe(store, shots, seed, repeats, modality, out_csv, out);
        if (sm->parsed()) return cmd_simmatrix(store_a, store_b, out_csv, ma, mb, out);
        if (gc->parsed()) return cmd_gradcheck(seed, coords, out);
        if (rp->parsed()) return cmd_report(metrics_dir, out_path, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kUsage;
}

}  // namespace trimodal::cli
