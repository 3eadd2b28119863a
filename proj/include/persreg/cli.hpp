#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "persreg/core_model.hpp"
#include "persreg/error.hpp"
#include "persreg/io.hpp"
#include "persreg/optimizer.hpp"
#include "persreg/population.hpp"
#include "persreg/predictor.hpp"
#include "persreg/simulator.hpp"

namespace persreg::cli {

using nlohmann::json;

/// Exit statuses shared by every subcommand.
enum ExitCode : int { ok = 0, input_error = 2, numerical_error = 3 };

/// Optional restriction of a data file to the train or test rows listed in meta.json.
struct RowSubset {
    std::string meta;
    std::string part;

    bool active() const { return !meta.empty(); }
};

struct SimulateConfig {
    Index n = 0;
    Index p = 0;
    Index k = 0;
    std::optional<std::uint64_t> seed;
    std::string out;
    double noise_std = 0.1;
    bool normalize_rows = false;
    double train_fraction = 0.8;
};

struct TrainConfig {
    std::string x, y, u, schema, out;
    std::optional<std::uint64_t> seed;
    Task task = Task::regression;
    HyperParams hyper;
    std::optional<io::Schema> inline_schema;
    bool trace = false;
    bool instrument = false;
    RowSubset rows;
};

struct PredictConfig {
    std::string model, x, u, out;
    bool theta_columns = false;
    bool population = false;
    RowSubset rows;
};

struct EvaluateConfig {
    std::string predictions, y, out;
    std::string omega_true, model;
    std::optional<Task> task;
    bool population = false;
    RowSubset rows; // training rows of omega_true, for recovery
};

namespace detail {

inline std::vector<Index> subset_rows(const RowSubset& s, Index total) {
    if (!s.active()) {
        std::vector<Index> all(static_cast<std::size_t>(total));
        for (Index i = 0; i < total; ++i) all[static_cast<std::size_t>(i)] = i;
        return all;
    }
    persreg::detail::require(s.part == "train" || s.part == "test", "--part must be 'train' or 'test'");
    const json meta = io::parse_json(io::read_text(s.meta), s.meta);
    std::vector<Index> ids;
    try {
        ids = meta.at("split").at(s.part).get<std::vector<Index>>();
    } catch (const json::exception& e) {
        throw ValidationError(s.meta + " has no usable split." + s.part + ": " + e.what());
    }
    for (Index i : ids)
        persreg::detail::require(i >= 0 && i < total, s.meta + " lists row " + std::to_string(i) +
                                                          " but the data has " + std::to_string(total) + " rows");
    return ids;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Index>& ids) {
    Eigen::MatrixXd out(static_cast<Index>(ids.size()), m.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) out.row(static_cast<Index>(r)) = m.row(ids[r]);
    return out;
}

inline std::filesystem::path prepare_dir(const std::string& dir) {
    persreg::detail::require(!dir.empty(), "--out is required");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
    return std::filesystem::path(dir);
}

inline std::string join_ids(const std::vector<Index>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(ids[i]);
    }
    return s;
}

inline json split_json(const std::vector<Index>& v) { return json(v); }

} // namespace detail

// ---------------------------------------------------------------- simulate

inline void run_simulate(const SimulateConfig& cfg) {
    persreg::detail::require(cfg.seed.has_value(), "--seed is required for simulate");
    persreg::detail::require(cfg.n >= 1, "--n must be >= 1");
    persreg::detail::require(cfg.p >= 1, "--p must be >= 1");
    persreg::detail::require(cfg.k >= 1, "--k must be >= 1");
    persreg::detail::require(cfg.noise_std >= 0.0, "--noise-std must be >= 0");
    persreg::detail::require(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0,
                             "--train-fraction must lie in (0, 1]");
    const auto dir = detail::prepare_dir(cfg.out);

    SimulationOptions opts;
    opts.noise_std = cfg.noise_std;
    opts.l1_normalize_rows = cfg.normalize_rows;
    const SyntheticInstance inst = generate(cfg.n, cfg.p, cfg.k, *cfg.seed, opts);
    const Split split = train_test_split(cfg.n, *cfg.seed, cfg.train_fraction);
    const Dataset& d = inst.dataset;

    io::write_text((dir / "X.csv").string(), io::matrix_to_csv(d.X, io::numbered("x", cfg.p)));
    io::write_text((dir / "Y.csv").string(), io::matrix_to_csv(d.Y, {"y"}));
    io::write_text((dir / "U.csv").string(), io::covariates_to_csv(d.U));
    io::write_text((dir / "omega_true.csv").string(),
                   io::matrix_to_csv(inst.omega_true.transpose(), io::numbered("theta", cfg.p)));

    std::vector<Index> c(inst.params.c.begin(), inst.params.c.end());
    const json meta = {{"seed", *cfg.seed},
                       {"n", cfg.n},
                       {"p", cfg.p},
                       {"k", cfg.k},
                       {"noise_std", cfg.noise_std},
                       {"normalize_rows", cfg.normalize_rows},
                       {"train_fraction", cfg.train_fraction},
                       {"generator",
                        {{"a", io::vector_to_json(inst.params.a)},
                         {"b", io::vector_to_json(inst.params.b)},
                         {"c", c}}},
                       {"split", {{"train", split.train}, {"test", split.test}}},
                       {"covariates", io::schema_to_json(io::schema_of(d.U))}};
    io::write_text((dir / "meta.json").string(), io::dump(meta));
}

// ---------------------------------------------------------------- train

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys = {
        "lambda",    "gamma",      "upsilon",   "q",     "radius",   "target_neighbors", "alpha0",
        "decay",     "init_noise", "rate_floor", "k_n",  "max_iters", "rel_tol",         "task",
        "covariates", "trace",     "instrument"};
    return keys;
}

/// Applies a JSON config object to cfg. Explicit command-line flags are applied afterwards.
inline void apply_config(TrainConfig& cfg, const json& j) {
    persreg::detail::require(j.is_object(), "config file must hold a JSON object");
    for (const auto& [key, _] : j.items())
        persreg::detail::require(config_keys().count(key) == 1, "unknown config key '" + key + "'");
    persreg::detail::require(!(j.contains("radius") && j.contains("target_neighbors")),
                             "config sets both 'radius' and 'target_neighbors'");
    try {
        HyperParams& h = cfg.hyper;
        if (j.contains("lambda")) h.lambda = j.at("lambda").get<double>();
        if (j.contains("gamma")) h.gamma = j.at("gamma").get<double>();
        if (j.contains("upsilon")) h.upsilon = j.at("upsilon").get<double>();
        if (j.contains("q")) h.q = j.at("q").get<Index>();
        if (j.contains("radius")) h.radius = RadiusRule::fixed(j.at("radius").get<double>());
        if (j.contains("target_neighbors"))
            h.radius = RadiusRule::target_neighbors(j.at("target_neighbors").get<double>());
        if (j.contains("alpha0")) h.alpha0 = j.at("alpha0").get<double>();
        if (j.contains("decay")) h.decay = j.at("decay").get<double>();
        if (j.contains("init_noise")) h.init_noise = j.at("init_noise").get<double>();
        if (j.contains("rate_floor")) h.rate_floor = j.at("rate_floor").get<double>();
        if (j.contains("k_n")) h.k_n = j.at("k_n").get<Index>();
        if (j.contains("max_iters")) h.max_iters = j.at("max_iters").get<Index>();
        if (j.contains("rel_tol")) h.rel_tol = j.at("rel_tol").get<double>();
        if (j.contains("task")) cfg.task = task_from_string(j.at("task").get<std::string>());
        if (j.contains("covariates")) cfg.inline_schema = io::schema_from_json(j.at("covariates"));
        if (j.contains("trace")) cfg.trace = j.at("trace").get<bool>();
        if (j.contains("instrument")) cfg.instrument = j.at("instrument").get<bool>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad value in config: ") + e.what());
    }
}

/// Reads X, Y and U (restricted to the requested rows) into a validated dataset.
inline Dataset load_dataset(const std::string& x, const std::string& y, const std::string& u,
                            const io::Schema& schema, Task task, const RowSubset& rows) {
    const Eigen::MatrixXd X = io::read_matrix_csv(x);
    const Eigen::VectorXd Y = io::read_vector_csv(y);
    const CovariateTable U = io::read_covariates_csv(u, schema);
    persreg::detail::require(X.rows() == Y.size() && X.rows() == static_cast<Index>(U.rows()),
                             "row counts differ: X has " + std::to_string(X.rows()) + ", Y has " +
                                 std::to_string(Y.size()) + ", U has " + std::to_string(U.rows()));
    const std::vector<Index> ids = detail::subset_rows(rows, X.rows());
    Dataset d;
    d.X = detail::take_rows(X, ids);
    d.Y = detail::take_rows(Y, ids).col(0);
    d.U = U.select_rows(ids);
    d.task = task;
    d.validate();
    return d;
}

inline json trace_record(const StepInfo& s, const HyperParams& h, bool instrument) {
    json r = {{"t", s.t},
              {"alpha", s.alpha},
              {"objective", s.objective},
              {"radius", s.radius},
              {"mean_neighbors", s.mean_neighbors},
              {"com_drift", s.com_drift}};
    if (instrument) {
        const double step_bound = com_step_bound(h, s.t);
        const double drift_bound = com_drift_bound(h, s.t + 1);
        r["com_step"] = s.com_step;
        r["com_step_bound"] = step_bound;
        r["com_drift_bound"] = drift_bound;
        r["step_bound_ok"] = s.com_step <= step_bound + 1e-10;
        r["drift_bound_ok"] = s.com_drift <= drift_bound + 1e-8;
    }
    return r;
}

/// Trains a model and writes model.json, Z_embedding.csv, phi.csv and (optionally) trace.jsonl.
/// Returns the number of instrumented bound violations (always 0 without instrumentation).
inline Index run_train(const TrainConfig& cfg) {
    persreg::detail::require(cfg.seed.has_value(), "--seed is required for train");
    persreg::detail::require(!cfg.x.empty() && !cfg.y.empty() && !cfg.u.empty(), "--x, --y and --u are required");
    persreg::detail::require(!cfg.schema.empty() || cfg.inline_schema.has_value(),
                             "a covariate schema is required (--schema or 'covariates' in --config)");
    const io::Schema schema = cfg.schema.empty() ? *cfg.inline_schema : io::read_schema(cfg.schema);
    HyperParams hyper = cfg.hyper;
    hyper.seed = *cfg.seed;
    hyper.validate();
    const Dataset data = load_dataset(cfg.x, cfg.y, cfg.u, schema, cfg.task, cfg.rows);
    const auto dir = detail::prepare_dir(cfg.out);

    std::string trace;
    Index violations = 0;
    FitOptions opts;
    if (cfg.trace || cfg.instrument) {
        opts.on_step = [&](const StepInfo& s) {
            const json r = trace_record(s, hyper, cfg.instrument);
            if (cfg.instrument && !(r.at("step_bound_ok").get<bool>() && r.at("drift_bound_ok").get<bool>()))
                ++violations;
            trace += r.dump() + "\n";
        };
    }
    const FitResult result = fit(data, hyper, opts);
    const TrainedModel& m = result.model;

    io::save_model((dir / "model.json").string(), m);
    io::write_text((dir / "Z_embedding.csv").string(),
                   io::matrix_to_csv(m.factorization.Z.transpose(), io::numbered("z", m.factorization.q())));
    std::string phi = io::csv_line({"covariate", "phi"});
    for (std::size_t l = 0; l < m.train_U.cols(); ++l)
        phi += io::csv_line({m.train_U.column(l).name, io::format_double(m.phi.phi(static_cast<Index>(l)))});
    io::write_text((dir / "phi.csv").string(), phi);
    if (cfg.trace || cfg.instrument) io::write_text((dir / "trace.jsonl").string(), trace);
    return violations;
}

// ---------------------------------------------------------------- predict

inline void run_predict(const PredictConfig& cfg) {
    persreg::detail::require(!cfg.model.empty() && !cfg.x.empty() && !cfg.u.empty() && !cfg.out.empty(),
                             "--model, --x, --u and --out are required");
    const TrainedModel model = io::load_model(cfg.model);
    const Eigen::MatrixXd Xall = io::read_matrix_csv(cfg.x);
    const CovariateTable Uall = io::read_covariates_csv(cfg.u, io::schema_of(model.train_U));
    persreg::detail::require(Xall.rows() == static_cast<Index>(Uall.rows()), "X and U row counts differ");
    persreg::detail::require(Xall.rows() == 0 || Xall.cols() == model.p(),
                             "X has " + std::to_string(Xall.cols()) + " columns, model expects " +
                                 std::to_string(model.p()));
    const std::vector<Index> ids = detail::subset_rows(cfg.rows, Xall.rows());

    std::vector<std::string> header = {"row_id", "y_hat", "neighbor_ids"};
    if (cfg.theta_columns)
        for (const auto& name : io::numbered("theta", model.p())) header.push_back(name);
    std::string out = io::csv_line(header);

    const Eigen::MatrixXd omega = assemble_omega(model.factorization);
    for (Index id : ids) {
        const Eigen::VectorXd x = Xall.row(id).transpose();
        Prediction pr;
        if (cfg.population) {
            pr.theta = model.theta_pop;
            pr.y_hat = predict_population(model.theta_pop, x, model.task);
        } else {
            pr = predict_point(model, omega, x, Uall.row(static_cast<std::size_t>(id)));
        }
        std::vector<std::string> fields = {std::to_string(id), io::format_double(pr.y_hat),
                                           detail::join_ids(pr.neighbor_ids)};
        if (cfg.theta_columns)
            for (Index j = 0; j < pr.theta.size(); ++j) fields.push_back(io::format_double(pr.theta(j)));
        out += io::csv_line(fields);
    }
    io::write_text(cfg.out, out);
}

// ---------------------------------------------------------------- evaluate

inline json compute_metrics(const EvaluateConfig& cfg) {
    const io::CsvTable preds = io::read_csv(cfg.predictions);
    persreg::detail::require(preds.header.size() >= 2 && preds.header[0] == "row_id" && preds.header[1] == "y_hat",
                             "'" + cfg.predictions + "' is not a predictions file");
    const Eigen::VectorXd Yall = io::read_vector_csv(cfg.y);
    const auto m = static_cast<Index>(preds.rows.size());
    persreg::detail::require(m >= 1, "no predictions to evaluate");
    Eigen::VectorXd y_hat(m), y_true(m);
    for (Index r = 0; r < m; ++r) {
        const auto& row = preds.rows[static_cast<std::size_t>(r)];
        const double id = io::parse_double(row[0], cfg.predictions + " row_id");
        persreg::detail::require(id >= 0 && id < static_cast<double>(Yall.size()) && id == std::floor(id),
                                 "row_id " + row[0] + " is outside the responses file");
        y_hat(r) = io::parse_double(row[1], cfg.predictions + " y_hat");
        y_true(r) = Yall(static_cast<Index>(id));
    }

    std::optional<TrainedModel> model;
    if (!cfg.model.empty()) model = io::load_model(cfg.model);
    const Task task = cfg.task ? *cfg.task : (model ? model->task : Task::regression);

    json out;
    bool degenerate = false;
    out["r2"] = squared_correlation(y_hat, y_true, &degenerate);
    out["r2_degenerate"] = degenerate;
    out["mse"] = mean_squared_error(y_hat, y_true);
    out["count"] = m;
    if (task == Task::classification) {
        out["auroc"] = auroc(y_hat, y_true);
        out["accuracy"] = accuracy(y_hat, y_true);
    }
    if (!cfg.omega_true.empty()) {
        persreg::detail::require(model.has_value(), "--omega-true needs --model");
        const Eigen::MatrixXd truth_all = io::read_matrix_csv(cfg.omega_true);
        const std::vector<Index> ids = detail::subset_rows(cfg.rows, truth_all.rows());
        const Eigen::MatrixXd truth = detail::take_rows(truth_all, ids).transpose();
        const Eigen::MatrixXd est = cfg.population ? Eigen::MatrixXd(model->theta_pop.replicate(1, model->n()))
                                                   : assemble_omega(model->factorization);
        persreg::detail::require(truth.rows() == est.rows() && truth.cols() == est.cols(),
                                 "omega_true rows do not match the model's training samples (use --meta/--part)");
        out["recovery"] = (est - truth).norm();
    }
    return out;
}

inline void run_evaluate(const EvaluateConfig& cfg) {
    persreg::detail::require(!cfg.predictions.empty() && !cfg.y.empty() && !cfg.out.empty(),
                             "--predictions, --y and --out are required");
    io::write_text(cfg.out, io::dump(compute_metrics(cfg)));
}

// ---------------------------------------------------------------- entry point

/// Parses argv, runs one subcommand and maps errors onto exit codes.
inline int main_entry(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    CLI::App app{"Personalized regression: simulate, train, predict, evaluate"};
    app.require_subcommand(1);

    SimulateConfig sim;
    std::uint64_t sim_seed = 0;
    auto* s = app.add_subcommand("simulate", "Generate a synthetic dataset with known per-sample coefficients");
    s->add_option("--n", sim.n, "Number of samples")->required();
    s->add_option("--p", sim.p, "Number of predictors")->required();
    s->add_option("--k", sim.k, "Number of covariates")->required();
    s->add_option("--seed", sim_seed, "Random seed")->required();
    s->add_option("--out", sim.out, "Output directory")->required();
    s->add_option("--noise-std", sim.noise_std, "Response noise standard deviation");
    s->add_flag("--normalize-rows", sim.normalize_rows, "Scale each predictor row to unit l1 norm");
    s->add_option("--train-fraction", sim.train_fraction, "Fraction of rows in the training split");

    TrainConfig tr;
    std::uint64_t tr_seed = 0;
    std::string config_path, task_name;
    HyperParams flags;
    double radius = 0.0, target = 0.0;
    auto* t = app.add_subcommand("train", "Fit personalized models");
    t->add_option("--x", tr.x, "Predictors CSV")->required();
    t->add_option("--y", tr.y, "Responses CSV")->required();
    t->add_option("--u", tr.u, "Covariates CSV")->required();
    t->add_option("--schema", tr.schema, "JSON file with a 'covariates' array");
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--seed", tr_seed, "Random seed")->required();
    t->add_option("--config", config_path, "JSON config; explicit flags take precedence");
    t->add_option("--task", task_name, "regression or classification");
    t->add_option("--meta", tr.rows.meta, "meta.json with a train/test split");
    t->add_option("--part", tr.rows.part, "Split part to use with --meta")->default_val("train");
    t->add_flag("--trace", tr.trace, "Write trace.jsonl");
    t->add_flag("--instrument", tr.instrument, "Add center-of-mass bound checks to the trace");
    auto* o_lambda = t->add_option("--lambda", flags.lambda, "l1 strength");
    auto* o_gamma = t->add_option("--gamma", flags.gamma, "Distance-matching strength");
    auto* o_upsilon = t->add_option("--upsilon", flags.upsilon, "Pull of phi towards 1");
    auto* o_q = t->add_option("--q", flags.q, "Latent dimension");
    auto* o_radius = t->add_option("--radius", radius, "Fixed neighborhood radius");
    auto* o_target = t->add_option("--target-neighbors", target, "Radius chosen for this mean neighbor count");
    o_radius->excludes(o_target);
    auto* o_alpha0 = t->add_option("--alpha0", flags.alpha0, "Initial learning rate");
    auto* o_decay = t->add_option("--decay", flags.decay, "Learning-rate decay factor per iteration");
    auto* o_noise = t->add_option("--init-noise", flags.init_noise, "Initialization noise scale");
    auto* o_floor = t->add_option("--rate-floor", flags.rate_floor, "Floor of the personalized rate denominator");
    auto* o_kn = t->add_option("--k-n", flags.k_n, "Neighbors used at prediction time");
    auto* o_iters = t->add_option("--max-iters", flags.max_iters, "Iteration cap");
    auto* o_tol = t->add_option("--rel-tol", flags.rel_tol, "Relative objective change that stops training");

    PredictConfig pr;
    auto* p = app.add_subcommand("predict", "Predict with a trained model");
    p->add_option("--model", pr.model, "model.json")->required();
    p->add_option("--x", pr.x, "Predictors CSV")->required();
    p->add_option("--u", pr.u, "Covariates CSV")->required();
    p->add_option("--out", pr.out, "Output predictions CSV")->required();
    p->add_option("--meta", pr.rows.meta, "meta.json with a train/test split");
    p->add_option("--part", pr.rows.part, "Split part to use with --meta")->default_val("test");
    p->add_flag("--theta", pr.theta_columns, "Append the assembled coefficients");
    p->add_flag("--population", pr.population, "Predict with the population model");

    EvaluateConfig ev;
    std::string ev_task;
    auto* e = app.add_subcommand("evaluate", "Score predictions");
    e->add_option("--predictions", ev.predictions, "Predictions CSV")->required();
    e->add_option("--y", ev.y, "Responses CSV indexed by row_id")->required();
    e->add_option("--out", ev.out, "Output metrics JSON")->required();
    e->add_option("--model", ev.model, "model.json (task and recovery)");
    e->add_option("--omega-true", ev.omega_true, "True coefficients CSV for recovery");
    e->add_option("--meta", ev.rows.meta, "meta.json selecting the training rows of omega_true");
    e->add_option("--part", ev.rows.part, "Split part of omega_true rows")->default_val("train");
    e->add_option("--task", ev_task, "regression or classification");
    e->add_flag("--population", ev.population, "Score recovery of the population model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, err, err);
        return input_error;
    }

    try {
        if (*s) {
            sim.seed = sim_seed;
            run_simulate(sim);
        } else if (*t) {
            tr.seed = tr_seed;
            if (!config_path.empty()) apply_config(tr, io::parse_json(io::read_text(config_path), config_path));
            if (!task_name.empty()) tr.task = task_from_string(task_name);
            HyperParams& h = tr.hyper;
            if (*o_lambda) h.lambda = flags.lambda;
            if (*o_gamma) h.gamma = flags.gamma;
            if (*o_upsilon) h.upsilon = flags.upsilon;
            if (*o_q) h.q = flags.q;
            if (*o_radius) h.radius = RadiusRule::fixed(radius);
            if (*o_target) h.radius = RadiusRule::target_neighbors(target);
            if (*o_alpha0) h.alpha0 = flags.alpha0;
            if (*o_decay) h.decay = flags.decay;
            if (*o_noise) h.init_noise = flags.init_noise;
            if (*o_floor) h.rate_floor = flags.rate_floor;
            if (*o_kn) h.k_n = flags.k_n;
            if (*o_iters) h.max_iters = flags.max_iters;
            if (*o_tol) h.rel_tol = flags.rel_tol;
            const Index violations = run_train(tr);
            if (violations > 0)
                err << "warning: " << violations << " iterations exceeded the center-of-mass bounds (see trace.jsonl)\n";
        } else if (*p) {
            run_predict(pr);
        } else if (*e) {
            if (!ev_task.empty()) ev.task = task_from_string(ev_task);
            run_evaluate(ev);
        }
    } catch (const ValidationError& ex) {
        err << "error: " << ex.what() << "\n";
        return input_error;
    } catch (const NumericalError& ex) {
        err << "numerical failure: " << ex.what() << "\n";
        return numerical_error;
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return input_error;
    }
    return ok;
}

} // namespace persreg::cli
