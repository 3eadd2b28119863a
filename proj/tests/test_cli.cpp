#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "persreg/cli.hpp"
#include "support.hpp"

using namespace persreg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(std::vector<std::string> args, std::string* err_out = nullptr) {
    args.insert(args.begin(), "persreg");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream err;
    const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), err);
    if (err_out) *err_out = err.str();
    return code;
}

std::string file(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

/// Simulated data in `dir` plus a short training run in `dir`/model.
void simulate_and_train(const std::string& dir, std::vector<std::string> extra = {}) {
    ASSERT_EQ(run({"simulate", "--n", "60", "--p", "2", "--k", "5", "--seed", "7", "--out", dir}), 0);
    std::vector<std::string> args = {"train", "--x", file(dir, "X.csv"), "--y", file(dir, "Y.csv"),
                                     "--u", file(dir, "U.csv"), "--schema", file(dir, "meta.json"),
                                     "--meta", file(dir, "meta.json"), "--seed", "3",
                                     "--out", file(dir, "model"), "--gamma", "1", "--upsilon", "100",
                                     "--lambda", "0.01", "--max-iters", "20"};
    args.insert(args.end(), extra.begin(), extra.end());
    ASSERT_EQ(run(args), 0);
}

std::vector<json> read_jsonl(const std::string& path) {
    std::vector<json> out;
    std::istringstream in(io::read_text(path));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

} // namespace

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(io::format_double(0.1), "0.1");
    EXPECT_EQ(io::format_double(-2.0), "-2");
    EXPECT_EQ(io::format_double(1e-300), "1e-300");
    testing_support::Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double v = rng.normal() * std::pow(10.0, double(rng.integer(-30, 30)));
        const std::string s = io::format_double(v);
        EXPECT_EQ(io::parse_double(s, "test"), v);
        // Never longer than the fewest %g digits that still round-trip.
        for (int prec = 1; prec <= 17; ++prec) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
            if (std::strtod(buf, nullptr) == v) {
                EXPECT_LE(s.size(), std::string(buf).size()) << s << " vs " << buf;
                break;
            }
        }
    }
    EXPECT_THROW(io::parse_double("1.5x", "test"), ValidationError);
    EXPECT_THROW(io::parse_double("", "test"), ValidationError);
}

TEST(Csv, QuotedFieldsRoundTrip) {
    const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", ""};
    const std::string line = io::csv_line(fields);
    EXPECT_EQ(io::split_csv_line(line.substr(0, line.size() - 1), "test"), fields);
    EXPECT_THROW(io::split_csv_line("\"open", "test"), ValidationError);
}

TEST(Csv, RaggedRowsAreRejected) {
    const std::string dir = testing_support::scratch_dir("ragged");
    io::write_text(file(dir, "bad.csv"), "a,b\n1,2\n3\n");
    EXPECT_THROW(io::read_csv(file(dir, "bad.csv")), ValidationError);
    EXPECT_THROW(io::read_csv(file(dir, "missing.csv")), ValidationError);
}

TEST(Csv, CategoricalCovariatesRoundTrip) {
    const CovariateTable U({CovariateColumn::continuous("age", {1.5, -0.25}),
                            CovariateColumn::categorical("site", {"north, east", "south"})});
    const std::string dir = testing_support::scratch_dir("cov");
    io::write_text(file(dir, "U.csv"), io::covariates_to_csv(U));
    EXPECT_EQ(io::read_covariates_csv(file(dir, "U.csv"), io::schema_of(U)), U);
    io::Schema wrong = io::schema_of(U);
    wrong[1].name = "region";
    EXPECT_THROW(io::read_covariates_csv(file(dir, "U.csv"), wrong), ValidationError);
}

TEST(ModelJson, RoundTripIsByteIdentical) {
    testing_support::Rng rng(2);
    const Dataset d = testing_support::random_dataset(rng, 15, 3, 4);
    HyperParams h;
    h.gamma = 1.0;
    h.max_iters = 5;
    h.seed = 99;
    h.radius = RadiusRule::fixed(0.75);
    const TrainedModel m = fit(d, h).model;
    const std::string text = io::dump(io::model_to_json(m));
    const TrainedModel back = io::model_from_json(json::parse(text));
    EXPECT_EQ(io::dump(io::model_to_json(back)), text);
    EXPECT_EQ(back.factorization.Z, m.factorization.Z);
    EXPECT_EQ(back.factorization.Q, m.factorization.Q);
    EXPECT_EQ(back.phi.phi, m.phi.phi);
    EXPECT_EQ(back.train_U, m.train_U);
    EXPECT_EQ(back.hyper, m.hyper);
}

TEST(ModelJson, MalformedModelsAreRejected) {
    EXPECT_THROW(io::model_from_json(json::parse("{}")), ValidationError);
    EXPECT_THROW(io::model_from_json(json::parse(R"({"format":"persreg-model","version":1})")), ValidationError);
}

TEST(Simulate, WritesDocumentedFiles) {
    const std::string dir = testing_support::scratch_dir("sim");
    ASSERT_EQ(run({"simulate", "--n", "100", "--p", "2", "--k", "5", "--seed", "7", "--out", dir}), 0);
    EXPECT_EQ(io::read_matrix_csv(file(dir, "X.csv")).rows(), 100);
    EXPECT_EQ(io::read_matrix_csv(file(dir, "X.csv")).cols(), 2);
    EXPECT_EQ(io::read_vector_csv(file(dir, "Y.csv")).size(), 100);
    EXPECT_EQ(io::read_csv(file(dir, "U.csv")).header.size(), 5u);
    EXPECT_EQ(io::read_matrix_csv(file(dir, "omega_true.csv")).cols(), 2);
    const json meta = json::parse(io::read_text(file(dir, "meta.json")));
    EXPECT_EQ(meta.at("seed").get<int>(), 7);
    EXPECT_EQ(meta.at("split").at("train").size() + meta.at("split").at("test").size(), 100u);

    // Values on disk are the generator's values exactly.
    const SyntheticInstance inst = generate(100, 2, 5, 7);
    EXPECT_EQ(io::read_matrix_csv(file(dir, "X.csv")), inst.dataset.X);
    EXPECT_EQ(io::read_vector_csv(file(dir, "Y.csv")), inst.dataset.Y);
    EXPECT_EQ(io::read_matrix_csv(file(dir, "omega_true.csv")), Eigen::MatrixXd(inst.omega_true.transpose()));
}

TEST(Simulate, RepeatedRunsAreByteIdentical) {
    const std::string a = testing_support::scratch_dir("sim_a"), b = testing_support::scratch_dir("sim_b");
    ASSERT_EQ(run({"simulate", "--n", "50", "--p", "3", "--k", "4", "--seed", "5", "--out", a}), 0);
    ASSERT_EQ(run({"simulate", "--n", "50", "--p", "3", "--k", "4", "--seed", "5", "--out", b}), 0);
    for (const char* name : {"X.csv", "Y.csv", "U.csv", "omega_true.csv", "meta.json"})
        EXPECT_EQ(io::read_text(file(a, name)), io::read_text(file(b, name))) << name;
}

TEST(Simulate, InvalidInputsExitWithTwo) {
    const std::string dir = testing_support::scratch_dir("sim_bad");
    std::string err;
    EXPECT_EQ(run({"simulate", "--n", "0", "--p", "2", "--k", "5", "--seed", "1", "--out", dir}, &err), 2);
    EXPECT_NE(err.find("--n"), std::string::npos);
    EXPECT_EQ(run({"simulate", "--n", "10", "--p", "2", "--k", "5", "--out", dir}), 2);
    EXPECT_EQ(run({"simulate", "--n", "10", "--p", "2", "--k", "5", "--seed", "1", "--out", "/proc/forbidden"}), 2);
    EXPECT_EQ(run({"bogus"}), 2);
}

TEST(Train, WritesModelAndExports) {
    const std::string dir = testing_support::scratch_dir("train");
    simulate_and_train(dir, {"--trace"});
    const TrainedModel m = io::load_model(file(dir, "model/model.json"));
    EXPECT_EQ(m.phi.size(), 5);
    EXPECT_EQ(m.n(), 48);  // 80% of 60
    EXPECT_EQ(m.hyper.seed, 3u);
    EXPECT_EQ(io::read_matrix_csv(file(dir, "model/Z_embedding.csv")), Eigen::MatrixXd(m.factorization.Z.transpose()));
    EXPECT_EQ(io::read_csv(file(dir, "model/phi.csv")).rows.size(), 5u);
    const auto trace = read_jsonl(file(dir, "model/trace.jsonl"));
    ASSERT_EQ(trace.size(), 20u);
    for (std::size_t t = 0; t < trace.size(); ++t) {
        EXPECT_EQ(trace[t].at("t").get<Index>(), static_cast<Index>(t));
        EXPECT_EQ(trace[t].at("alpha").get<double>(), learning_rate(m.hyper, static_cast<Index>(t)));
        for (const char* key : {"objective", "radius", "mean_neighbors", "com_drift"}) EXPECT_TRUE(trace[t].contains(key));
    }
    const std::string text = io::read_text(file(dir, "model/model.json"));
    EXPECT_EQ(io::dump(io::model_to_json(io::load_model(file(dir, "model/model.json")))), text);
}

TEST(Train, ZeroIterationsSerializesTheInitialization) {
    const std::string dir = testing_support::scratch_dir("train0");
    ASSERT_EQ(run({"simulate", "--n", "40", "--p", "2", "--k", "5", "--seed", "2", "--out", dir}), 0);
    ASSERT_EQ(run({"train", "--x", file(dir, "X.csv"), "--y", file(dir, "Y.csv"), "--u", file(dir, "U.csv"),
                   "--schema", file(dir, "meta.json"), "--seed", "4", "--max-iters", "0", "--out", file(dir, "m")}),
              0);
    const SyntheticInstance inst = generate(40, 2, 5, 2);
    HyperParams h;
    h.seed = 4;
    h.max_iters = 0;
    const Eigen::VectorXd pop = fit_population(inst.dataset, ElasticNetConfig::matching(h, Task::regression));
    const TrainedModel init = to_model(initialize(inst.dataset, h, pop), inst.dataset, h);
    EXPECT_EQ(io::read_text(file(dir, "m/model.json")), io::dump(io::model_to_json(init)));
}

TEST(Train, ConfigIsMergedUnderFlags) {
    const std::string dir = testing_support::scratch_dir("train_cfg");
    ASSERT_EQ(run({"simulate", "--n", "30", "--p", "2", "--k", "3", "--seed", "2", "--out", dir}), 0);
    io::write_text(file(dir, "cfg.json"),
                   R"({"lambda": 0.5, "gamma": 3, "max_iters": 2, "target_neighbors": 4,
                       "covariates": [{"name":"u0","kind":"continuous"},{"name":"u1","kind":"continuous"},
                                      {"name":"u2","kind":"continuous"}]})");
    ASSERT_EQ(run({"train", "--x", file(dir, "X.csv"), "--y", file(dir, "Y.csv"), "--u", file(dir, "U.csv"),
                   "--config", file(dir, "cfg.json"), "--lambda", "0.2", "--seed", "1", "--out", file(dir, "m")}),
              0);
    const TrainedModel m = io::load_model(file(dir, "m/model.json"));
    EXPECT_EQ(m.hyper.lambda, 0.2);
    EXPECT_EQ(m.hyper.gamma, 3.0);
    EXPECT_EQ(m.hyper.max_iters, 2);
    EXPECT_EQ(m.hyper.radius, RadiusRule::target_neighbors(4.0));
}

TEST(Train, InputErrorsExitWithTwo) {
    const std::string dir = testing_support::scratch_dir("train_bad");
    ASSERT_EQ(run({"simulate", "--n", "30", "--p", "2", "--k", "3", "--seed", "2", "--out", dir}), 0);
    const std::vector<std::string> base = {"train", "--x", file(dir, "X.csv"), "--u", file(dir, "U.csv"),
                                           "--schema", file(dir, "meta.json"), "--out", file(dir, "m")};
    auto with = [&](std::vector<std::string> extra) {
        std::vector<std::string> a = base;
        a.insert(a.end(), extra.begin(), extra.end());
        return a;
    };
    // Missing seed.
    EXPECT_EQ(run(with({"--y", file(dir, "Y.csv")})), 2);
    // Unknown config key.
    io::write_text(file(dir, "cfg.json"), R"({"lambda": 0.5, "lamda": 1})");
    std::string err;
    EXPECT_EQ(run(with({"--y", file(dir, "Y.csv"), "--seed", "1", "--config", file(dir, "cfg.json")}), &err), 2);
    EXPECT_NE(err.find("lamda"), std::string::npos);
    // Row-count mismatch between files.
    io::write_text(file(dir, "Yshort.csv"), "y\n1\n2\n");
    EXPECT_EQ(run(with({"--y", file(dir, "Yshort.csv"), "--seed", "1"})), 2);
    // Schema that does not cover U.
    io::write_text(file(dir, "schema.json"), R"({"covariates": [{"name":"u0","kind":"continuous"}]})");
    EXPECT_EQ(run({"train", "--x", file(dir, "X.csv"), "--y", file(dir, "Y.csv"), "--u", file(dir, "U.csv"),
                   "--schema", file(dir, "schema.json"), "--seed", "1", "--out", file(dir, "m")}),
              2);
    // Bad hyperparameter.
    EXPECT_EQ(run(with({"--y", file(dir, "Y.csv"), "--seed", "1", "--decay", "1.5"})), 2);
}

TEST(Train, OptimizerFailureExitsWithThree) {
    const std::string dir = testing_support::scratch_dir("train_nan");
    ASSERT_EQ(run({"simulate", "--n", "30", "--p", "2", "--k", "3", "--seed", "2", "--out", dir}), 0);
    std::string err;
    EXPECT_EQ(run({"train", "--x", file(dir, "X.csv"), "--y", file(dir, "Y.csv"), "--u", file(dir, "U.csv"),
                   "--schema", file(dir, "meta.json"), "--seed", "1", "--alpha0", "1e300", "--max-iters", "50",
                   "--out", file(dir, "m")},
                  &err),
              3);
    EXPECT_FALSE(err.empty());
}

TEST(Train, InstrumentedTraceFieldsMatchRecomputedBounds) {
    const std::string dir = testing_support::scratch_dir("train_instr");
    ASSERT_EQ(run({"simulate", "--n", "60", "--p", "2", "--k", "5", "--seed", "8", "--normalize-rows", "--out", dir}),
              0);
    ASSERT_EQ(run({"train", "--x", file(dir, "X.csv"), "--y", file(dir, "Y.csv"), "--u", file(dir, "U.csv"),
                   "--schema", file(dir, "meta.json"), "--seed", "1", "--gamma", "1", "--upsilon", "100",
                   "--lambda", "0.01", "--max-iters", "100", "--instrument", "--out", file(dir, "m")}),
              0);
    const TrainedModel m = io::load_model(file(dir, "m/model.json"));
    const double a0 = m.hyper.alpha0, c = m.hyper.decay, lam = m.hyper.lambda;
    for (const json& r : read_jsonl(file(dir, "m/trace.jsonl"))) {
        const double t = r.at("t").get<double>();
        const double step_bound = a0 * std::pow(c, t) * (lam + 1.0);
        const double drift_bound = a0 * (lam + 1.0) * (1.0 - std::pow(c, t + 1.0)) / (1.0 - c);
        EXPECT_NEAR(r.at("com_step_bound").get<double>(), step_bound, 1e-15);
        EXPECT_NEAR(r.at("com_drift_bound").get<double>(), drift_bound, 1e-12);
        EXPECT_EQ(r.at("step_bound_ok").get<bool>(), r.at("com_step").get<double>() <= step_bound + 1e-10);
        EXPECT_EQ(r.at("drift_bound_ok").get<bool>(), r.at("com_drift").get<double>() <= drift_bound + 1e-8);
    }
}

TEST(Train, InstrumentedTraceSatisfiesStepBound) {
    const std::string dir = testing_support::scratch_dir("train_instr2");
    ASSERT_EQ(run({"simulate", "--n", "60", "--p", "2", "--k", "5", "--seed", "8", "--normalize-rows", "--out", dir}),
              0);
    ASSERT_EQ(run({"train", "--x", file(dir, "X.csv"), "--y", file(dir, "Y.csv"), "--u", file(dir, "U.csv"),
                   "--schema", file(dir, "meta.json"), "--seed", "1", "--gamma", "1", "--upsilon", "100",
                   "--lambda", "0.01", "--max-iters", "100", "--instrument", "--out", file(dir, "m")}),
              0);
    const TrainedModel m = io::load_model(file(dir, "m/model.json"));
    std::size_t violations = 0, records = 0;
    for (const json& r : read_jsonl(file(dir, "m/trace.jsonl"))) {
        ++records;
        const double bound = m.hyper.alpha0 * std::pow(m.hyper.decay, r.at("t").get<double>()) * (m.hyper.lambda + 1.0);
        if (r.at("com_step").get<double>() > bound + 1e-10) ++violations;
    }
    EXPECT_EQ(records, 100u);
    EXPECT_EQ(violations, 0u) << violations << " of " << records << " steps moved the center of mass too far";
}

TEST(Predict, NearestCopyEchoesTrainingModel) {
    const std::string dir = testing_support::scratch_dir("predict");
    simulate_and_train(dir, {"--k-n", "1"});
    ASSERT_EQ(run({"predict", "--model", file(dir, "model/model.json"), "--x", file(dir, "X.csv"), "--u",
                   file(dir, "U.csv"), "--meta", file(dir, "meta.json"), "--part", "train", "--theta", "--out",
                   file(dir, "pred.csv")}),
              0);
    const TrainedModel m = io::load_model(file(dir, "model/model.json"));
    const Eigen::MatrixXd omega = assemble_omega(m.factorization);
    const io::CsvTable t = io::read_csv(file(dir, "pred.csv"));
    ASSERT_EQ(t.header, (std::vector<std::string>{"row_id", "y_hat", "neighbor_ids", "theta0", "theta1"}));
    ASSERT_EQ(static_cast<Index>(t.rows.size()), m.n());
    for (Index i = 0; i < m.n(); ++i) {
        const auto& row = t.rows[static_cast<std::size_t>(i)];
        EXPECT_EQ(row[2], std::to_string(i));
        EXPECT_EQ(io::parse_double(row[3], "t"), omega(0, i));
        EXPECT_EQ(io::parse_double(row[4], "t"), omega(1, i));
    }
}

TEST(Predict, EmptyTestSetGivesHeaderOnly) {
    const std::string dir = testing_support::scratch_dir("predict_empty");
    ASSERT_EQ(run({"simulate", "--n", "20", "--p", "2", "--k", "3", "--seed", "1", "--train-fraction", "1", "--out", dir}), 0);
    ASSERT_EQ(run({"train", "--x", file(dir, "X.csv"), "--y", file(dir, "Y.csv"), "--u", file(dir, "U.csv"),
                   "--schema", file(dir, "meta.json"), "--seed", "1", "--max-iters", "2", "--gamma", "1",
                   "--out", file(dir, "m")}),
              0);
    ASSERT_EQ(run({"predict", "--model", file(dir, "m/model.json"), "--x", file(dir, "X.csv"), "--u",
                   file(dir, "U.csv"), "--meta", file(dir, "meta.json"), "--out", file(dir, "pred.csv")}),
              0);
    EXPECT_EQ(io::read_text(file(dir, "pred.csv")), "row_id,y_hat,neighbor_ids\n");
}

TEST(Predict, BadInputsExitWithTwo) {
    const std::string dir = testing_support::scratch_dir("predict_bad");
    simulate_and_train(dir);
    io::write_text(file(dir, "broken.json"), "{\"format\": \"persreg-model\", \"version\": 1, \"Z\": [[1,");
    EXPECT_EQ(run({"predict", "--model", file(dir, "broken.json"), "--x", file(dir, "X.csv"), "--u",
                   file(dir, "U.csv"), "--out", file(dir, "p.csv")}),
              2);
    io::write_text(file(dir, "U2.csv"), "a,b\n1,2\n");
    EXPECT_EQ(run({"predict", "--model", file(dir, "model/model.json"), "--x", file(dir, "X.csv"), "--u",
                   file(dir, "U2.csv"), "--out", file(dir, "p.csv")}),
              2);
}

TEST(Evaluate, PerfectPredictions) {
    const std::string dir = testing_support::scratch_dir("eval");
    io::write_text(file(dir, "Y.csv"), "y\n1\n2.5\n-3\n");
    io::write_text(file(dir, "p.csv"), "row_id,y_hat,neighbor_ids\n0,1,\n1,2.5,\n2,-3,\n");
    ASSERT_EQ(run({"evaluate", "--predictions", file(dir, "p.csv"), "--y", file(dir, "Y.csv"), "--out",
                   file(dir, "metrics.json")}),
              0);
    const json m = json::parse(io::read_text(file(dir, "metrics.json")));
    EXPECT_EQ(m.at("r2").get<double>(), 1.0);
    EXPECT_EQ(m.at("mse").get<double>(), 0.0);
    EXPECT_FALSE(m.contains("auroc"));
}

TEST(Evaluate, ClassificationMetrics) {
    const std::string dir = testing_support::scratch_dir("eval_cls");
    io::write_text(file(dir, "Y.csv"), "y\n0\n0\n1\n1\n");
    io::write_text(file(dir, "hand.csv"), "row_id,y_hat,neighbor_ids\n0,0.1,\n1,0.4,\n2,0.35,\n3,0.8,\n");
    io::write_text(file(dir, "flat.csv"), "row_id,y_hat,neighbor_ids\n0,0.5,\n1,0.5,\n2,0.5,\n3,0.5,\n");
    ASSERT_EQ(run({"evaluate", "--predictions", file(dir, "hand.csv"), "--y", file(dir, "Y.csv"), "--task",
                   "classification", "--out", file(dir, "m1.json")}),
              0);
    ASSERT_EQ(run({"evaluate", "--predictions", file(dir, "flat.csv"), "--y", file(dir, "Y.csv"), "--task",
                   "classification", "--out", file(dir, "m2.json")}),
              0);
    EXPECT_EQ(json::parse(io::read_text(file(dir, "m1.json"))).at("auroc").get<double>(), 0.75);
    EXPECT_EQ(json::parse(io::read_text(file(dir, "m1.json"))).at("accuracy").get<double>(), 0.75);
    EXPECT_EQ(json::parse(io::read_text(file(dir, "m2.json"))).at("auroc").get<double>(), 0.5);
}

TEST(Evaluate, RecoveryAgainstTruth) {
    const std::string dir = testing_support::scratch_dir("eval_rec");
    simulate_and_train(dir);
    ASSERT_EQ(run({"predict", "--model", file(dir, "model/model.json"), "--x", file(dir, "X.csv"), "--u",
                   file(dir, "U.csv"), "--meta", file(dir, "meta.json"), "--out", file(dir, "pred.csv")}),
              0);
    ASSERT_EQ(run({"evaluate", "--predictions", file(dir, "pred.csv"), "--y", file(dir, "Y.csv"), "--model",
                   file(dir, "model/model.json"), "--omega-true", file(dir, "omega_true.csv"), "--meta",
                   file(dir, "meta.json"), "--out", file(dir, "metrics.json")}),
              0);
    const json m = json::parse(io::read_text(file(dir, "metrics.json")));
    const TrainedModel model = io::load_model(file(dir, "model/model.json"));
    const json meta = json::parse(io::read_text(file(dir, "meta.json")));
    const auto train = meta.at("split").at("train").get<std::vector<Index>>();
    const SyntheticInstance inst = generate(60, 2, 5, 7);
    Eigen::MatrixXd truth(2, static_cast<Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) truth.col(static_cast<Index>(i)) = inst.omega_true.col(train[i]);
    EXPECT_DOUBLE_EQ(m.at("recovery").get<double>(), (assemble_omega(model.factorization) - truth).norm());
    EXPECT_EQ(m.at("count").get<Index>(), 12);
}

TEST(Evaluate, LengthMismatchExitsWithTwo) {
    const std::string dir = testing_support::scratch_dir("eval_bad");
    io::write_text(file(dir, "Y.csv"), "y\n1\n2\n");
    io::write_text(file(dir, "p.csv"), "row_id,y_hat,neighbor_ids\n0,1,\n5,2,\n");
    EXPECT_EQ(run({"evaluate", "--predictions", file(dir, "p.csv"), "--y", file(dir, "Y.csv"), "--out",
                   file(dir, "m.json")}),
              2);
}
