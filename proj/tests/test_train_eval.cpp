#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "support.hpp"
#include "trimodal/checkpoint.hpp"
#include "trimodal/errors.hpp"
#include "trimodal/eval.hpp"
#include "trimodal/trainer.hpp"

using namespace trimodal;
using trimodal::test::Rng;

namespace {

bool same_cloud(const GaussianCloud& a, const GaussianCloud& b) {
    if (a.gaussians.size() != b.gaussians.size()) return false;
    for (std::size_t i = 0; i < a.gaussians.size(); ++i) {
        const auto &x = a.gaussians[i], &y = b.gaussians[i];
        if (x.position != y.position || x.color != y.color || x.scale != y.scale || x.rotation != y.rotation ||
            x.opacity != y.opacity) {
            return false;
        }
    }
    return true;
}

bool same_params(const ParamSet& a, const ParamSet& b) {
    if (a.names() != b.names()) return false;
    for (const auto& n : a.names()) {
        if (a.at(n).values != b.at(n).values) return false;
    }
    return true;
}

std::vector<double> e(std::size_t d, std::size_t i) {
    std::vector<double> v(d, 0.0);
    v[i] = 1.0;
    return v;
}

struct Trained {
    TrainConfig cfg;
    TrainResult result;
};

const Trained& tiny_run() {
    static const Trained run = [] {
        Trained t;
        t.cfg = test::tiny_train_config();
        t.result = train(t.cfg);
        return t;
    }();
    return run;
}

}  // namespace

TEST(Synthetic, SameSeedIsBitIdentical) {
    const auto a = generate_synthetic_dataset(3, 4, 32, 11);
    const auto b = generate_synthetic_dataset(3, 4, 32, 11);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(a[i].text, b[i].text);
        EXPECT_EQ(a[i].views.views, b[i].views.views);
        EXPECT_TRUE(same_cloud(a[i].cloud, b[i].cloud));
    }
    const auto c = generate_synthetic_dataset(3, 4, 32, 12);
    EXPECT_NE(a[0].text, c[0].text);
}

TEST(Synthetic, BalancedLabelsAndUnitEmbeddings) {
    const auto samples = generate_synthetic_dataset(8, 25, 16, 1);
    ASSERT_EQ(samples.size(), 200u);
    std::vector<std::size_t> counts(8);
    for (const auto& s : samples) {
        ASSERT_LT(s.label, 8u);
        ++counts[s.label];
        EXPECT_NEAR(test::norm(s.text), 1.0, 1e-12);
        EXPECT_NEAR(test::norm(s.views.anchor), 1.0, 1e-12);
        for (const auto& v : s.views.views) EXPECT_NEAR(test::norm(v), 1.0, 1e-12);
        EXPECT_EQ(s.cloud.gaussians.size(), 16u);
    }
    for (auto c : counts) EXPECT_EQ(c, 25u);
}

TEST(Synthetic, TemplatesCycle) {
    EXPECT_EQ(template_names().size(), 8u);
    EXPECT_EQ(template_names().front(), "sphere");
}

TEST(Synthetic, SameClassTextsCloserThanCrossClass) {
    SyntheticSpec spec;
    spec.classes = 8;
    spec.train_per_class = 125;
    spec.test_per_class = 1;
    spec.gaussians = 4;
    spec.seed = 3;
    const auto data = generate_synthetic(spec);
    ASSERT_EQ(data.train.size(), 1000u);
    Rng rng(3);
    double same = 0.0, cross = 0.0;
    std::size_t ns = 0, nc = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        const auto& a = data.train[rng() % 1000];
        const auto& b = data.train[rng() % 1000];
        if (&a == &b) continue;
        if (a.label == b.label) {
            same += test::dot(a.text, b.text);
            ++ns;
        } else {
            cross += test::dot(a.text, b.text);
            ++nc;
        }
    }
    ASSERT_GT(ns, 0u);
    EXPECT_GT(same / static_cast<double>(ns), cross / static_cast<double>(nc) + 0.5);
}

TEST(Synthetic, DatasetDirectoryRoundTrip) {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.train_per_class = 2;
    spec.test_per_class = 1;
    spec.gaussians = 8;
    spec.dim = 8;
    spec.views = 2;
    const auto data = generate_synthetic(spec);
    const auto dir = std::filesystem::temp_directory_path() / "trimodal_dataset_rt";
    std::filesystem::remove_all(dir);
    save_dataset(data, dir);
    const auto back = load_dataset(dir);
    EXPECT_EQ(back.dim, data.dim);
    EXPECT_EQ(back.class_names, data.class_names);
    ASSERT_EQ(back.train.size(), data.train.size());
    ASSERT_EQ(back.test.size(), data.test.size());
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        EXPECT_EQ(back.train[i].id, data.train[i].id);
        EXPECT_EQ(back.train[i].label, data.train[i].label);
        EXPECT_EQ(back.train[i].views.count(), data.train[i].views.count());
        EXPECT_LE(test::max_abs_diff(back.train[i].text, data.train[i].text), 1e-7);
    }
    std::filesystem::remove_all(dir);
}

TEST(Synthetic, ClassOfId) {
    EXPECT_EQ(class_of("torus/train_3"), "torus");
    EXPECT_EQ(class_of("loose"), "loose");
}

TEST(Config, TotalSteps) {
    TrainConfig c;
    c.batch_size = 16;
    c.epochs = 15;
    EXPECT_EQ(c.total_steps(200), 15u * 12u);
    c.steps = 500;
    EXPECT_EQ(c.total_steps(200), 500u);
}

TEST(Batches, FullBatchesWithoutRepeatsWithinEpoch) {
    std::set<std::size_t> seen;
    for (std::uint64_t step = 0; step < 4; ++step) {
        const auto idx = batch_indices(5, 18, 4, step);
        ASSERT_EQ(idx.size(), 4u);
        for (auto i : idx) {
            EXPECT_LT(i, 18u);
            EXPECT_TRUE(seen.insert(i).second);
        }
    }
    EXPECT_EQ(batch_indices(5, 18, 4, 2), batch_indices(5, 18, 4, 2));
}

TEST(Train, ZeroLearningRateKeepsParameters) {
    auto cfg = test::tiny_train_config();
    cfg.optim.lr = 0.0;
    cfg.steps = 3;
    const auto init = init_train_state(cfg);
    const auto r = train(cfg);
    EXPECT_EQ(r.state.step, 3u);
    EXPECT_TRUE(same_params(r.state.params, init.params));
}

TEST(Train, LossLogIsDeterministic) {
    const auto& first = tiny_run();
    const auto again = train(first.cfg);
    EXPECT_EQ(loss_log_csv(again.log), loss_log_csv(first.result.log));
    EXPECT_TRUE(same_params(again.state.params, first.result.state.params));
    ASSERT_EQ(first.result.log.size(), first.cfg.steps);
    for (const auto& row : first.result.log) {
        EXPECT_TRUE(std::isfinite(row.loss));
        EXPECT_GE(row.tau, kMinTemperature);
        EXPECT_LE(row.tau, kMaxTemperature);
    }
}

TEST(Train, ResumeIsBitIdentical) {
    const auto& full = tiny_run();
    auto half_cfg = full.cfg;
    half_cfg.steps = full.cfg.steps / 2;
    const auto half = train(half_cfg);
    const Checkpoint ckpt = deserialize_checkpoint(serialize_checkpoint(make_checkpoint(half_cfg, half.state)));
    const auto rest = train(full.cfg, &ckpt);

    std::vector<LossRow> joined = half.log;
    joined.insert(joined.end(), rest.log.begin(), rest.log.end());
    EXPECT_EQ(loss_log_csv(joined), loss_log_csv(full.result.log));
    EXPECT_TRUE(same_params(rest.state.params, full.result.state.params));
    EXPECT_EQ(rest.state.step, full.result.state.step);
}

TEST(Train, LossLogCsvLayout) {
    const std::vector<LossRow> rows{{0, 1.5, 1.0, 2.0, 0.07}};
    EXPECT_EQ(loss_log_csv(rows), "step,loss,loss_text,loss_image,tau\n0,1.5,1,2,0.070000000000000007\n");
}

TEST(Train, NonFiniteLossAborts) {
    const auto cfg = test::tiny_train_config();
    const StubTeacher teacher(cfg.model.teacher);
    const auto data = load_training_data(cfg);
    const auto samples = prepare_samples(data.train, cfg.model, teacher);
    auto state = init_train_state(cfg);
    state.params.at(kLogTemperature).values[0] = std::nan("");
    try {
        train_steps(state, cfg, samples, 2);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
    }
}

TEST(ZeroShot, MatchingClassRanksFirst) {
    const Embeddings classes{e(4, 0), e(4, 1), e(4, 2), e(4, 3)};
    const auto r = zero_shot_classify({e(4, 3)}, classes, 1);
    EXPECT_EQ(r[0], (Ranking{3}));
    const auto all = zero_shot_classify({e(4, 3)}, classes, 4);
    Ranking sorted = all[0];
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (Ranking{0, 1, 2, 3}));
    EXPECT_EQ(all[0], (Ranking{3, 0, 1, 2}));
}

TEST(ZeroShot, MatchesSortOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        Embeddings classes;
        for (int c = 0; c < 3; ++c) classes.push_back(test::unit_vector(5, rng));
        const auto obj = test::unit_vector(5, rng);
        std::vector<std::pair<double, std::size_t>> oracle;
        for (std::size_t c = 0; c < 3; ++c) oracle.emplace_back(-test::dot(obj, classes[c]), c);
        std::sort(oracle.begin(), oracle.end());
        const auto got = zero_shot_classify({obj}, classes, 3)[0];
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(got[i], oracle[i].second);
    }
}

TEST(TopK, Examples) {
    const std::vector<std::size_t> ks{1, 3, 5};
    const std::vector<Ranking> right{{0, 1, 2, 3, 4}, {1, 0, 2, 3, 4}};
    EXPECT_EQ(topk_accuracy(right, std::vector<std::size_t>{0, 1}, ks), (std::vector<double>{1, 1, 1}));
    const std::vector<Ranking> second{{1, 0, 2, 3, 4}, {0, 1, 2, 3, 4}};
    const auto s = topk_accuracy(second, std::vector<std::size_t>{0, 1}, ks);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[1], 1.0);
    const std::vector<Ranking> mixed{{0, 1, 2, 3, 4}, {2, 1, 0, 3, 4}, {1, 3, 2, 4, 0}, {4, 0, 3, 2, 1}};
    EXPECT_EQ(topk_accuracy(mixed, std::vector<std::size_t>{0, 2, 2, 2}, std::vector<std::size_t>{1, 3, 5}),
              (std::vector<double>{0.5, 0.75, 1.0}));
}

TEST(Retrieve, SelfRanksFirstAndFullGallery) {
    Rng rng(2);
    EmbeddingStore g(6);
    for (int i = 0; i < 5; ++i) g.add("obj" + std::to_string(i), Modality::g3d_text_space, test::unit_vector(6, rng));
    const auto& q = g.records()[2];
    const auto hits = retrieve(q.values, g, 10);
    ASSERT_EQ(hits.size(), 5u);
    EXPECT_EQ(hits[0].id, "obj2");
    EXPECT_NEAR(hits[0].score, 1.0, 1e-6);
    for (std::size_t i = 1; i < hits.size(); ++i) EXPECT_GE(hits[i - 1].score, hits[i].score);
    EXPECT_THROW(retrieve(q.values, EmbeddingStore(6), 1), ContractError);
}

TEST(Retrieve, MatchesExhaustiveSort) {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        EmbeddingStore g(4);
        for (int i = 0; i < 10; ++i) {
            auto v = test::unit_vector(4, rng);
            for (auto& x : v) x *= test::uniform(rng, 0.5, 2.0);
            g.add("id" + std::to_string(i), Modality::g3d_image_space, v);
        }
        const auto q = test::unit_vector(4, rng);
        std::vector<std::pair<double, std::string>> oracle;
        for (const auto& r : g.records()) oracle.emplace_back(-test::dot(q, r.values) / test::norm(r.values), r.id);
        std::sort(oracle.begin(), oracle.end());
        const auto hits = retrieve(q, g, 3);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(hits[i].id, oracle[i].second);
    }
}

TEST(Retrieve, TiesBreakById) {
    EmbeddingStore g(2);
    g.add("b", Modality::text, e(2, 0));
    g.add("a", Modality::text, e(2, 0));
    g.add("c", Modality::image, e(2, 0));
    const auto hits = retrieve(e(2, 0), g, 3, Modality::text);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].id, "a");
    EXPECT_EQ(hits[1].id, "b");
}

TEST(RetrievalRecall, WholeSetAndChunks) {
    const Embeddings q{e(2, 0), e(2, 1), e(2, 0), e(2, 1)};
    const Embeddings g{e(2, 0), e(2, 1), e(2, 1), e(2, 0)};
    const std::vector<std::size_t> labels{0, 1, 0, 1};
    EXPECT_EQ(retrieval_recall(q, g, labels, 1), 1.0);
    EXPECT_EQ(retrieval_recall(q, g, labels, 1, 2), 0.5);
    EXPECT_EQ(retrieval_recall(q, g, labels, 2, 2), 1.0);
}

TEST(Probe, SeparableFixtureIsPerfect) {
    Rng rng(4);
    Embeddings emb;
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < 2; ++c) {
        for (int i = 0; i < 24; ++i) {
            auto v = e(4, c);
            for (auto& x : v) x += test::uniform(rng, -0.1, 0.1);
            emb.push_back(v);
            labels.push_back(c);
        }
    }
    // The hyperplane x0 = x1 separates the fixture exactly.
    for (std::size_t i = 0; i < emb.size(); ++i) EXPECT_EQ(emb[i][0] < emb[i][1], labels[i] == 1);
    const auto r = few_shot_linear_probe(emb, labels, std::vector<std::size_t>{16}, 0);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].shots, 16u);
    EXPECT_EQ(r[0].accuracies.size(), 10u);
    EXPECT_EQ(r[0].mean_accuracy, 1.0);
}

TEST(Probe, SplitsAreDisjointAndComplete) {
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < 3; ++c) labels.insert(labels.end(), 5, c);
    for (std::size_t shots : {1u, 4u, 5u}) {
        for (std::size_t rep = 0; rep < 3; ++rep) {
            const auto [tr, ev] = probe_split(labels, shots, 9, rep);
            EXPECT_EQ(tr.size(), 3 * shots);
            EXPECT_EQ(tr.size() + ev.size(), labels.size());
            std::set<std::size_t> all(tr.begin(), tr.end());
            for (auto i : ev) EXPECT_TRUE(all.insert(i).second);
            std::vector<std::size_t> per(3);
            for (auto i : tr) ++per[labels[i]];
            for (auto n : per) EXPECT_EQ(n, shots);
        }
    }
}

TEST(Probe, ContractsAndDeterminism) {
    Rng rng(5);
    Embeddings emb;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 30; ++i) {
        emb.push_back(test::unit_vector(6, rng));
        labels.push_back(i % 3);
    }
    const std::vector<std::size_t> shots{1, 2, 4};
    ProbeOptions opt;
    opt.repeats = 3;
    const auto a = few_shot_linear_probe(emb, labels, shots, 17, opt);
    const auto b = few_shot_linear_probe(emb, labels, shots, 17, opt);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].accuracies, b[i].accuracies);
    EXPECT_THROW(few_shot_linear_probe(emb, labels, std::vector<std::size_t>{11}, 17, opt), ContractError);
}

TEST(Similarity, Examples) {
    Rng rng(6);
    Embeddings a;
    for (int i = 0; i < 3; ++i) a.push_back(test::unit_vector(5, rng));
    const auto self = similarity_matrix({"x", "y", "z"}, a, {"x", "y", "z"}, a);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(self.at(i, i), 1.0, 1e-12);

    const auto orth = similarity_matrix({"p", "q"}, {e(4, 0), e(4, 1)}, {"r", "s"}, {e(4, 2), e(4, 3)});
    for (double v : orth.values) EXPECT_NEAR(v, 0.0, 1e-15);

    const Embeddings l{{3, 4}, {1, 0}};
    const Embeddings r{{0, 2}, {1, 1}};
    const auto m = similarity_matrix({"a", "b"}, l, {"c", "d"}, r);
    EXPECT_NEAR(m.at(0, 0), 0.8, 1e-15);
    EXPECT_NEAR(m.at(0, 1), 7.0 / (5.0 * std::sqrt(2.0)), 1e-15);
    EXPECT_NEAR(m.at(1, 0), 0.0, 1e-15);
    EXPECT_NEAR(m.at(1, 1), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(similarity_csv(m).substr(0, 7), "id,c,d\n");
}

TEST(Metrics, CsvRoundTripAndTable) {
    const Metrics m{{"zero_shot_top1", 0.875}, {"text_r1", 1.0 / 3.0}};
    EXPECT_EQ(parse_metrics_csv(metrics_csv(m)), m);
    EXPECT_THROW(parse_metrics_csv("name,value\nx,1\n"), FormatError);
    const auto table = metrics_table({{"full", m}, {"ablate", {{"zero_shot_top1", 0.5}}}});
    EXPECT_NE(table.find("87.50"), std::string::npos);
    EXPECT_NE(table.find("ablate"), std::string::npos);
}

TEST(Evaluate, PureAndDeterministic) {
    const auto& run = tiny_run();
    const auto data = load_training_data(run.cfg);
    const StubTeacher teacher(run.cfg.model.teacher);
    const auto samples = prepare_samples(data.test, run.cfg.model, teacher);
    ParamSet ps = run.result.state.params;
    const auto before = serialize_checkpoint(make_checkpoint(run.cfg, run.result.state));
    EvalOptions opt;
    opt.probe_shots = {1, 2};
    opt.probe_repeats = 2;
    const auto a = evaluate(ps, run.cfg.model, samples, data.class_text, opt);
    EXPECT_TRUE(same_params(ps, run.result.state.params));
    EXPECT_EQ(serialize_checkpoint(make_checkpoint(run.cfg, TrainState{ps, run.result.state.adam,
                                                                       run.result.state.step})),
              before);

    std::vector<PreparedSample> reversed(samples.rbegin(), samples.rend());
    const auto b = evaluate(ps, run.cfg.model, reversed, data.class_text, opt);
    EXPECT_EQ(a, b);
    ASSERT_EQ(a.size(), 7u);
    EXPECT_EQ(a[0].first, "zero_shot_top1");
    EXPECT_EQ(a.back().first, "probe_2shot");
    for (const auto& [k, v] : a) {
        EXPECT_GE(v, 0.0) << k;
        EXPECT_LE(v, 1.0) << k;
    }
}
