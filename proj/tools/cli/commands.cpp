#include "commands.hpp"

#include <ctime>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "artifacts.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"

namespace regimealloc::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string config_hash(const RunConfig& cfg) {
    json j;
    to_json(j, cfg);
    j.erase("output_dir");
    return sha256_hex(j.dump());
}

/// Collects the files a stage touches so the manifest entry can hash them.
class StageRecord {
public:
    StageRecord(std::string name, const RunConfig& cfg)
        : name_(std::move(name)), out_(resolve_output_dir(cfg)), config_hash_(config_hash(cfg)), started_(utc_now()) {
        fs::create_directories(out_);
    }

    const fs::path& out() const { return out_; }

    fs::path input(const fs::path& p) {
        inputs_[p.string()] = sha256_hex(read_file(p));
        return p;
    }
    fs::path artifact_input(const std::string& file) {
        const auto p = out_ / file;
        if (!fs::exists(p))
            throw ValidationError("missing artifact '" + p.string() + "'; run the upstream stage first");
        return input(p);
    }
    void write(const std::string& file, std::string_view content) {
        write_atomic(out_ / file, content);
        outputs_[file] = sha256_hex(content);
    }
    void write_json(const std::string& file, const json& j) { write(file, j.dump(2) + "\n"); }
    void note(const std::string& key, json value) { notes_[key] = std::move(value); }

    void commit() {
        const auto path = out_ / "manifest.json";
        json manifest = fs::exists(path) ? read_json(path) : json::object();
        if (!manifest.contains("stages")) manifest["stages"] = json::object();
        manifest["tool"] = "regimealloc";
        manifest["stages"][name_] = json{{"config_hash", config_hash_},
                                         {"inputs", inputs_},
                                         {"outputs", outputs_},
                                         {"started_at", started_},
                                         {"finished_at", utc_now()}};
        for (const auto& [key, value] : notes_.items()) manifest["stages"][name_][key] = value;
        cli::write_json(path, manifest);
    }

private:
    std::string name_;
    fs::path out_;
    std::string config_hash_;
    std::string started_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
    json notes_ = json::object();
};

ReturnSeries read_returns(StageRecord& rec) {
    const auto p = rec.artifact_input("returns.csv");
    return parse_returns_csv(read_file(p), p.string());
}

ReturnKind return_kind(const RunConfig& cfg) { return cfg.return_kind == "log" ? ReturnKind::Log : ReturnKind::Simple; }

int month_index(const Date& d) {
    return static_cast<int>(d.year()) * 12 + static_cast<int>(static_cast<unsigned>(d.month())) - 1;
}

/// Splits transitions into calendar periods of `months`, keyed on the destination day.
std::vector<TransitionCounts> batch_counts(const RegimeModel& model, int months) {
    const int k = model.k();
    if (model.dates.size() != model.labels.size()) return {count_transitions(model.labels, k)};
    std::vector<TransitionCounts> batches;
    int current = -1;
    for (std::size_t t = 1; t < model.labels.size(); ++t) {
        const int period = month_index(model.dates[t]) / months;
        if (period != current) {
            TransitionCounts c;
            c.counts = CountMatrix::Zero(k, k);
            batches.push_back(std::move(c));
            current = period;
        }
        ++batches.back().counts(model.labels[t - 1] - 1, model.labels[t] - 1);
    }
    if (batches.empty()) {
        TransitionCounts c;
        c.counts = CountMatrix::Zero(k, k);
        batches.push_back(std::move(c));
    }
    return batches;
}

std::string fmt(double v, int digits = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

}  // namespace

void cmd_ingest(const RunConfig& cfg, std::ostream& log) {
    if (cfg.data.empty()) throw ValidationError("no input data: set 'data' in the config or pass --data");
    StageRecord rec("ingest", cfg);
    std::vector<fs::path> paths;
    for (const auto& d : cfg.data) paths.emplace_back(d);
    CsvLayout layout;
    layout.date_column = cfg.date_column;
    auto loaded = load_prices(std::span<const fs::path>(paths), layout);
    for (const auto& p : paths) rec.input(p);
    const auto returns = compute_returns(loaded.prices);

    rec.write("prices.csv", prices_csv(loaded.prices));
    rec.write("returns.csv", returns_csv(returns));
    rec.write_json("load_report.json", load_report_json(loaded.report));
    rec.note("tickers", loaded.prices.tickers);
    rec.commit();
    log << "ingest: " << loaded.prices.asset_count() << " tickers, " << loaded.prices.size() << " days ("
        << loaded.report.rows_dropped << " dropped)\n";
}

void cmd_cluster(const RunConfig& cfg, std::ostream& log) {
    StageRecord rec("cluster", cfg);
    const auto returns = read_returns(rec);
    VolatilityOptions vopt;
    vopt.window = cfg.window;
    vopt.ddof = cfg.vol_ddof;
    vopt.kind = return_kind(cfg);
    const auto vol = rolling_volatility(returns, cfg.reference_weights, vopt);

    ClusterConfig cc;
    cc.k = cfg.k;
    cc.max_iters = cfg.kmeans_max_iters;
    cc.tol = cfg.kmeans_tol;
    cc.seed = cfg.kmeans_seed;
    cc.n_init = cfg.kmeans_n_init;
    const auto model = kmeans_fit(vol, cc);

    rec.write("volatility.csv", volatility_csv(vol));
    rec.write_json("regimes.json", regime_model_json(model));
    rec.commit();
    log << "cluster: " << model.k() << " states over " << model.labels.size() << " days, wcss " << fmt(model.wcss)
        << "\n";
}

void cmd_transitions(const RunConfig& cfg, std::ostream& log) {
    StageRecord rec("transitions", cfg);
    const auto model = regime_model_from_json(read_json(rec.artifact_input("regimes.json")));
    const auto batches = batch_counts(model, cfg.batch_months);

    TransitionArtifact art;
    art.prior = DirichletPrior::uniform(model.k(), cfg.prior_alpha);
    art.counts.counts = CountMatrix::Zero(model.k(), model.k());
    for (const auto& b : batches) art.counts += b;
    art.batches = batches.size();
    art.source = cfg.matrix_source;

    GibbsConfig g;
    g.n_chains = cfg.gibbs_chains;
    g.n_iters = cfg.gibbs_iters;
    g.burn_in = cfg.effective_burn_in();
    g.seed = cfg.gibbs_seed;
    art.run = gibbs_sample(art.prior, batches, g);
    if (cfg.matrix_source == "gibbs") {
        art.posterior = posterior_from_gibbs(art.prior, art.counts, *art.run);
    } else {
        art.posterior = posterior_mean(art.prior, art.counts);
        art.posterior.samples_summary = art.run->summary;
    }

    rec.write_json("transitions.json", transitions_json(art));
    rec.commit();
    const auto& ps = art.run->psrf;
    log << "transitions: " << art.counts.total() << " transitions in " << art.batches << " batches, max PSRF "
        << fmt(ps.max_psrf) << (ps.converged ? " (converged)" : " (NOT converged)") << "\n";
    if (!ps.converged && !cfg.allow_unconverged)
        throw ConvergenceGateError("Gelman-Rubin max PSRF " + fmt(ps.max_psrf) + " >= " + fmt(PsrfResult::threshold) +
                                   "; rerun with more iterations or pass --allow-unconverged");
}

void cmd_mixing(const RunConfig& cfg, std::ostream& log) {
    StageRecord rec("mixing", cfg);
    const auto p = transition_matrix_from_json(read_json(rec.artifact_input("transitions.json")));
    const auto s = mixing_analysis(p, cfg.epsilon);
    rec.write_json("spectral.json", spectral_json(s));
    rec.commit();
    log << "mixing: SLEM " << fmt(s.slem) << ", point estimate " << s.point_estimate << " steps, bounds ["
        << fmt(s.lower_bound) << ", " << fmt(s.upper_bound) << "]" << (s.reversible ? "" : " (chain not reversible)")
        << "\n";
}

void cmd_allocate(const RunConfig& cfg, std::ostream& log) {
    StageRecord rec("allocate", cfg);
    const auto returns = read_returns(rec);
    const auto cov = estimate_covariance(returns);
    SolverOptions opts;
    opts.seed = cfg.solver_seed;
    json allocs = json::array();
    for (auto m : kAllMethods) allocs.push_back(allocation_json(allocate(m, cov, opts)));
    rec.write_json("allocations.json",
              json{{"tickers", returns.tickers}, {"covariance", matrix_json(cov.sigma())}, {"allocations", allocs}});
    rec.commit();
    log << "allocate: " << kAllMethods.size() << " methods over " << returns.asset_count() << " assets\n";
}

void cmd_backtest(const RunConfig& cfg, std::ostream& log) {
    StageRecord rec("backtest", cfg);
    const auto returns = read_returns(rec);
    const auto model = regime_model_from_json(read_json(rec.artifact_input("regimes.json")));
    const auto p = transition_matrix_from_json(read_json(rec.artifact_input("transitions.json")));
    const auto alloc_doc = read_json(rec.artifact_input("allocations.json"));

    if (model.dates.size() != model.labels.size()) throw ValidationError("regimes.json: labels carry no dates");
    std::map<std::chrono::sys_days, std::size_t> row_of;
    for (std::size_t i = 0; i < returns.dates.size(); ++i) row_of[returns.dates[i]] = i;
    std::vector<std::size_t> rows;
    rows.reserve(model.dates.size());
    for (const auto& d : model.dates) {
        const auto it = row_of.find(d);
        if (it == row_of.end()) throw ValidationError("regime date " + format_iso_date(d) + " has no return row");
        rows.push_back(it->second);
    }

    StaticReturns full;
    if (cfg.refit_months > 0) {
        SolverOptions opts;
        opts.seed = cfg.solver_seed;
        full = walk_forward_static_returns(returns, kAllMethods, cfg.refit_months, opts);
    } else {
        std::vector<WeightVector> weights;
        for (const auto& a : alloc_doc.at("allocations")) weights.push_back(weights_from_json(a));
        full = static_returns(returns, weights);
    }
    StaticReturns aligned;
    aligned.methods = full.methods;
    aligned.returns.resize(static_cast<Eigen::Index>(rows.size()), full.returns.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        aligned.dates.push_back(full.dates[rows[i]]);
        aligned.returns.row(static_cast<Eigen::Index>(i)) = full.returns.row(static_cast<Eigen::Index>(rows[i]));
    }

    const auto assignment = select_best_methods(aligned, model.labels, model.k());
    const auto w = total_return_weights(p, assignment, aligned.methods);
    const auto mode = cfg.blend_mode == "argmax" ? BlendMode::Argmax : BlendMode::Blend;
    const auto ledger = run_dynamic_backtest(aligned, model.labels, w, mode);
    const auto report = performance_report(ledger, cfg.risk_free_rate, cfg.metrics_ddof);

    rec.write_json("assignment.json", assignment_json(assignment));
    rec.write_json("total_return_weights.json", total_return_weights_json(w));
    rec.write("total_return_weights.csv", total_return_weights_csv(w));
    rec.write_json("report.json", report_json(report));
    rec.write("yearly.csv", yearly_csv(report));
    rec.write("totals.csv", totals_csv(report));
    rec.write("value_paths.csv", value_paths_csv(ledger));
    rec.commit();
    log << "backtest: " << ledger.size() << " days";
    for (const auto& s : report.series) log << ", " << s.name << " " << fmt(s.totals.total_return);
    log << "\n";
}

void cmd_pipeline_from_fixtures(const RunConfig& cfg, const fs::path& fixtures_dir, std::ostream& log) {
    StageRecord rec("pipeline-fixtures", cfg);
    const auto fx = load_paper_fixtures(fixtures_dir);
    for (const auto& e : fs::directory_iterator(fixtures_dir))
        if (e.path().extension() == ".csv") rec.input(e.path());

    const auto w = reproduce_first_asset_weights(fx);
    const double err = (w.weights - fx.first.total_return_weights.values).cwiseAbs().maxCoeff();
    const auto spectral = mixing_analysis(normalize_rows(fx.transition), cfg.epsilon);

    rec.write_json("assignment.json", assignment_json(fx.first_assignment));
    rec.write_json("total_return_weights.json", total_return_weights_json(w));
    rec.write("total_return_weights.csv", total_return_weights_csv(w));
    rec.write_json("spectral.json", spectral_json(spectral));
    rec.write_json("fixtures_report.json", fixtures_report(fx, cfg.epsilon, cfg.risk_free_rate));
    rec.commit();
    log << "pipeline (fixtures): total return weights max abs error " << fmt(err, 3) << ", SLEM " << fmt(spectral.slem)
        << ", point estimate " << spectral.point_estimate << " steps\n";
    if (!(err <= 1e-5)) throw ComputationError("total return weights differ from the fixture by " + fmt(err, 3));
}

void cmd_reproduce_fixtures(const RunConfig& cfg, const fs::path& fixtures_dir, std::ostream& log) {
    StageRecord rec("reproduce-paper-fixtures", cfg);
    const auto fx = load_paper_fixtures(fixtures_dir);
    for (const auto& e : fs::directory_iterator(fixtures_dir))
        if (e.path().extension() == ".csv") rec.input(e.path());
    const auto report = fixtures_report(fx, cfg.epsilon, cfg.risk_free_rate);
    rec.write_json("fixtures_report.json", report);
    rec.commit();

    const auto& tw = report.at("first_asset_total_return_weights");
    log << "total return weights: max abs error " << fmt(tw.at("max_abs_error").get<double>(), 3)
        << (tw.at("passed").get<bool>() ? " PASS" : " FAIL") << "\n";
    for (const auto& c : report.at("mixing_point_estimates").at("cases"))
        log << "mixing " << c.at("asset_set").get<std::string>() << ": " << c.at("computed").get<long>() << " steps (expected "
            << c.at("expected").get<long>() << ")\n";
    const auto& sh = report.at("sharpe_convention");
    log << "sharpe convention: " << sh.at("within_1e-4").get<std::size_t>() << "/" << sh.at("cells").get<std::size_t>()
        << " cells within 1e-4, " << sh.at("consistent_with_rounding").get<std::size_t>()
        << " consistent with 6-decimal rounding\n";
}

int run_stage(const std::string& stage, const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return kExitOk;
    } catch (const ConvergenceGateError& e) {
        err << "error [" << stage << "]: " << e.what() << "\n";
        return kExitConvergence;
    } catch (const ValidationError& e) {
        err << "error [" << stage << "]: " << e.what() << "\n";
        return kExitValidation;
    } catch (const fs::filesystem_error& e) {
        err << "error [" << stage << "]: " << e.what() << "\n";
        return kExitValidation;
    } catch (const json::exception& e) {
        err << "error [" << stage << "]: malformed artifact: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error [" << stage << "]: " << e.what() << "\n";
        return kExitComputation;
    }
}

namespace {

/// Flag overrides recorded against a scratch config and copied onto the
/// file-derived config only when the flag was actually given.
class Overrides {
public:
    explicit Overrides(CLI::App& app) : app_(app) {}

    template <class T>
    void option(const std::string& flags, T RunConfig::*field, const std::string& help) {
        auto* opt = app_.add_option(flags, scratch_.*field, help);
        apply_.emplace_back(opt, [field](RunConfig& dst, const RunConfig& src) { dst.*field = src.*field; });
    }
    void flag(const std::string& flags, bool RunConfig::*field, const std::string& help) {
        auto* opt = app_.add_flag(flags, scratch_.*field, help);
        apply_.emplace_back(opt, [field](RunConfig& dst, const RunConfig& src) { dst.*field = src.*field; });
    }
    void apply(RunConfig& cfg) const {
        for (const auto& [opt, copy] : apply_)
            if (opt->count() > 0) copy(cfg, scratch_);
    }

private:
    CLI::App& app_;
    RunConfig scratch_;
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const RunConfig&)>>> apply_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Volatility-regime portfolio engine: clustering, Bayesian transitions, mixing analysis, static "
                 "allocators and the state-dependent backtest."};
    app.name("regimealloc");
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string fixtures_dir = default_fixtures_dir().string();
    app.add_option("-c,--config", config_path, "JSON run configuration");
    app.add_option("--fixtures-dir", fixtures_dir, "directory holding the published-table CSV fixtures");

    Overrides ov(app);
    ov.option("--data", &RunConfig::data, "price CSV files, inner-joined on date");
    ov.option("--date-column", &RunConfig::date_column, "name of the date column");
    ov.option("--reference-weights", &RunConfig::reference_weights, "weights of the volatility reference portfolio");
    ov.option("--window", &RunConfig::window, "rolling volatility window in days");
    ov.option("--vol-ddof", &RunConfig::vol_ddof, "0 population, 1 sample volatility");
    ov.option("--return-kind", &RunConfig::return_kind, "simple|log returns for the volatility observable");
    ov.option("-k,--states", &RunConfig::k, "number of volatility states");
    ov.option("--kmeans-max-iters", &RunConfig::kmeans_max_iters, "Lloyd iteration cap");
    ov.option("--kmeans-tol", &RunConfig::kmeans_tol, "centroid shift tolerance");
    ov.option("--kmeans-seed", &RunConfig::kmeans_seed, "seed for the random initial centroids");
    ov.option("--kmeans-n-init", &RunConfig::kmeans_n_init, "k-means restarts");
    ov.option("--prior-alpha", &RunConfig::prior_alpha, "uniform Dirichlet pseudo-count");
    ov.option("--chains", &RunConfig::gibbs_chains, "Gibbs chains");
    ov.option("--iters", &RunConfig::gibbs_iters, "Gibbs iterations per chain");
    ov.option("--burn-in", &RunConfig::gibbs_burn_in, "Gibbs burn-in; -1 uses 20% of iterations");
    ov.option("--gibbs-seed", &RunConfig::gibbs_seed, "Gibbs seed");
    ov.option("--batch-months", &RunConfig::batch_months, "calendar months per transition-count batch");
    ov.option("--matrix-source", &RunConfig::matrix_source, "gibbs|analytic transition matrix downstream");
    ov.option("--epsilon", &RunConfig::epsilon, "total-variation target for mixing times");
    ov.option("--risk-free-rate", &RunConfig::risk_free_rate, "annual risk-free rate for Sharpe ratios");
    ov.option("--metrics-ddof", &RunConfig::metrics_ddof, "0 population, 1 sample yearly volatility");
    ov.option("--blend-mode", &RunConfig::blend_mode, "blend|argmax dynamic weights");
    ov.option("--refit-months", &RunConfig::refit_months, "walk-forward refit cadence; 0 fits once");
    ov.option("--solver-seed", &RunConfig::solver_seed, "seed for randomized ERC starts");
    ov.option("-o,--output-dir", &RunConfig::output_dir,
              std::string("artifact directory; defaults to $") + kOutputEnv + " then ./regimealloc-out");
    ov.flag("--allow-unconverged", &RunConfig::allow_unconverged, "continue past a failed PSRF gate");

    const std::vector<std::pair<std::string, std::string>> simple = {
        {"ingest", "load price CSVs and write prices, returns and a load report"},
        {"cluster", "compute the volatility observable and fit the k-means states"},
        {"transitions", "count transitions and sample the Dirichlet posterior"},
        {"mixing", "stationary distribution, SLEM and mixing-time bounds"},
        {"allocate", "static ERC, minimum-variance, maximum-diversification and equal weights"},
        {"backtest", "per-state method selection, total return weights and the dynamic backtest"},
    };
    for (const auto& [name, help] : simple) app.add_subcommand(name, help);

    auto* pipeline = app.add_subcommand("pipeline", "run every stage in order");
    std::string from_fixtures;
    pipeline->add_option("--from-fixtures", from_fixtures, "reproduce from shipped fixtures instead of price data")
        ->check(CLI::IsMember({"paper_first_asset"}));
    app.add_subcommand("reproduce-paper-fixtures", "rerun every algebraic check against the published tables");

    auto* synth = app.add_subcommand("generate-synthetic", "write a two-regime synthetic price panel");
    SyntheticConfig scfg;
    std::string synth_out;
    synth->add_option("--out", synth_out, "price CSV path; default <output-dir>/synthetic_prices.csv");
    synth->add_option("--days", scfg.n_days, "return days");
    synth->add_option("--assets", scfg.n_assets, "number of assets");
    synth->add_option("--block-days", scfg.block_days, "days per regime block");
    synth->add_option("--seed", scfg.seed, "generator seed");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    RunConfig cfg;
    const int cfg_code = run_stage("config", [&] {
        if (!config_path.empty()) cfg = load_config(config_path);
        ov.apply(cfg);
        cfg.validate();
    }, err);
    if (cfg_code != kExitOk) return cfg_code;

    const std::map<std::string, void (*)(const RunConfig&, std::ostream&)> table = {
        {"ingest", cmd_ingest},   {"cluster", cmd_cluster},   {"transitions", cmd_transitions},
        {"mixing", cmd_mixing},   {"allocate", cmd_allocate}, {"backtest", cmd_backtest},
    };

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (auto it = table.find(name); it != table.end())
        return run_stage(name, [&] { it->second(cfg, out); }, err);

    if (name == "pipeline") {
        if (!from_fixtures.empty())
            return run_stage("pipeline", [&] { cmd_pipeline_from_fixtures(cfg, fixtures_dir, out); }, err);
        for (const char* stage : {"ingest", "cluster", "transitions", "mixing", "allocate", "backtest"}) {
            const int code = run_stage(stage, [&] { table.at(stage)(cfg, out); }, err);
            if (code != kExitOk) return code;
        }
        return kExitOk;
    }
    if (name == "reproduce-paper-fixtures")
        return run_stage(name, [&] { cmd_reproduce_fixtures(cfg, fixtures_dir, out); }, err);

    return run_stage(name, [&] {
        const auto data = generate_synthetic(scfg);
        const fs::path dir = resolve_output_dir(cfg);
        const fs::path prices = synth_out.empty() ? dir / "synthetic_prices.csv" : fs::path(synth_out);
        write_atomic(prices, prices_csv(data.prices));
        std::string truth = "date,regime\n";
        for (std::size_t t = 0; t < data.regimes.size(); ++t)
            truth += format_iso_date(data.prices.dates[t + 1]) + "," + std::to_string(data.regimes[t]) + "\n";
        auto truth_path = prices;
        truth_path.replace_filename(prices.stem().string() + "_regimes.csv");
        write_atomic(truth_path, truth);
        out << "generate-synthetic: " << data.prices.size() << " days x " << data.prices.asset_count() << " assets -> "
            << prices.string() << "\n";
    }, err);
}

}  // namespace regimealloc::cli
