// rbf: command-line front end for the risk budgeting library.

#include "rbf/rbf.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace rbf;

struct Options {
    std::string returns;
    std::string model;
    std::string factors;
    std::string config;
    std::string weights;
    std::string out = "out";
    std::string measure = "vol";
    std::string kind = "rb";
    std::string period = "daily";
    double alpha = 0.95;
    std::optional<double> lambda_asset;
    std::optional<double> lambda_factor;
    std::uint64_t seed = 0;
    std::optional<int> iterations;
    std::optional<double> step;
    std::optional<int> batch;
    double grid_lo = 1e-2;
    double grid_hi = 1e1;
    int grid_n = 7;
    std::optional<long> lookback;
    std::string rebalance;
};

/// Raised for a finished run whose solver did not meet its tolerance.
struct NotConverged {
    std::string what;
};

ProblemKind parse_kind(const std::string& s) {
    if (s == "rb") return ProblemKind::RB;
    if (s == "frb") return ProblemKind::FRB;
    if (s == "frb-long") return ProblemKind::FRBLongOnly;
    if (s == "afrb") return ProblemKind::AFRB;
    if (s == "mv") return ProblemKind::MinVariance;
    if (s == "mv-long") return ProblemKind::MinVarianceLongOnly;
    if (s == "ew") return ProblemKind::EqualWeight;
    fail(ErrorCode::InvalidInput, "unknown kind '" + s + "'");
}

Frequency parse_frequency(const std::string& s) {
    if (s == "daily") return Frequency::Daily;
    if (s == "weekly") return Frequency::Weekly;
    if (s == "monthly") return Frequency::Monthly;
    fail(ErrorCode::InvalidInput, "unknown frequency '" + s + "'");
}

PeriodLength parse_period(const std::string& s) {
    if (s == "daily") return PeriodLength::Daily;
    if (s == "weekly") return PeriodLength::Weekly;
    if (s == "monthly") return PeriodLength::Monthly;
    if (s == "annual") return PeriodLength::Annual;
    fail(ErrorCode::InvalidInput, "unknown period '" + s + "'");
}

RiskMeasureSpec measure_of(const Options& o) {
    if (o.measure == "vol") return RiskMeasureSpec::volatility();
    if (o.measure == "es") return RiskMeasureSpec::expected_shortfall(o.alpha);
    fail(ErrorCode::InvalidInput, "unknown measure '" + o.measure + "'");
}

json read_config(const Options& o) {
    if (o.config.empty()) return json::object();
    try {
        json j = json::parse(detail::read_file(o.config));
        if (!j.is_object()) fail(ErrorCode::SchemaError, o.config + ": config must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaError, o.config + ": " + e.what());
    }
}

/// Solver settings: defaults per measure, then the config's "solver" block,
/// then command-line flags.
SolverConfig solver_config(const Options& o, const json& cfg, bool stochastic) {
    SolverConfig s = stochastic ? SolverConfig::stochastic() : SolverConfig::deterministic();
    try {
        if (cfg.contains("solver")) {
            const json& j = cfg["solver"];
            s.max_iterations = j.value("max_iterations", s.max_iterations);
            s.tolerance = j.value("tolerance", s.tolerance);
            s.step.c = j.value("step", s.step.c);
            s.step.gamma = j.value("step_exponent", s.step.gamma);
            s.batch_size = j.value("batch_size", s.batch_size);
            s.averaging = j.value("averaging", s.averaging);
            s.burn_in = j.value("burn_in", s.burn_in);
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("solver: ") + e.what());
    }
    if (o.iterations) s.max_iterations = *o.iterations;
    if (o.step) s.step.c = *o.step;
    if (o.batch) s.batch_size = *o.batch;
    s.seed = o.seed;
    s.validate();
    return s;
}

struct Inputs {
    std::optional<ModelInputs> model;
    std::optional<ScenarioSet> scenarios;
    std::vector<std::string> assets;
    std::vector<std::string> factor_labels;
    BudgetSpec budgets;
    PeriodLength period = PeriodLength::Annual;

    const FactorModel* factors() const { return model ? &model->factors : nullptr; }
};

Inputs load_inputs(const Options& o) {
    Inputs in;
    if (!o.model.empty()) in.model = load_model_json(o.model);
    if (!o.returns.empty()) in.scenarios = load_returns_csv(o.returns, parse_period(o.period));
    require(in.model || in.scenarios, ErrorCode::InvalidInput, "give --model and/or --returns");
    if (in.model && in.scenarios)
        require(in.model->assets == in.scenarios->labels(), ErrorCode::ValidationError,
                "asset-labels: returns columns differ from the model's assets");
    if (in.model) {
        in.assets = in.model->assets;
        in.factor_labels = in.model->factors.labels();
        in.budgets = in.model->budgets;
        in.period = in.model->period;
    } else {
        in.assets = in.scenarios->labels();
        in.budgets.asset_budgets = Vector::Constant(in.scenarios->assets(), 1.0 / static_cast<double>(in.scenarios->assets()));
    }
    if (in.scenarios) in.period = in.scenarios->period();
    if (o.lambda_asset) in.budgets.lambda_asset = *o.lambda_asset;
    if (o.lambda_factor) in.budgets.lambda_factor = *o.lambda_factor;
    return in;
}

bool is_stochastic(const RiskMeasureSpec& m) { return m.kind != MeasureKind::Volatility; }

SolveResult solve_with(const Inputs& in, const ProblemSpec& p, const SolverConfig& cfg) {
    if (in.scenarios) return solve(p, *in.scenarios, in.factors(), cfg);
    require(p.measure.kind == MeasureKind::Volatility, ErrorCode::UnsupportedInput,
            p.measure.name() + " needs scenarios: pass --returns");
    require(in.model && in.model->covariance, ErrorCode::InvalidInput,
            "the model has no covariance (sigma or sigma_f/sigma_idio); pass --returns");
    return solve(p, *in.model->covariance, in.factors(), cfg);
}

json run_meta(const std::string& command, const Options& o, const RiskMeasureSpec& m, const BudgetSpec& b) {
    return json{{"command", command},
                {"measure", m.name()},
                {"alpha", m.kind == MeasureKind::ExpectedShortfall ? json(m.level) : json(nullptr)},
                {"seed", o.seed},
                {"lambda_asset", b.lambda_asset},
                {"lambda_factor", b.lambda_factor}};
}

int cmd_solve(const Options& o) {
    const json cfg = read_config(o);
    const Inputs in = load_inputs(o);
    ProblemSpec p{parse_kind(o.kind), in.budgets, measure_of(o)};
    const SolverConfig sc = solver_config(o, cfg, is_stochastic(p.measure));
    const SolveResult r = solve_with(in, p, sc);
    OutputDir out(o.out);
    json meta = run_meta("solve", o, p.measure, p.budgets);
    meta["kind"] = o.kind;
    emit_solve(out, r, in.assets, in.factor_labels, meta);
    out.finish();
    if (!r.converged)
        throw NotConverged{"solver stopped with residual " + format_full(r.residual) + " after " +
                           std::to_string(r.iterations) + " iterations"};
    return 0;
}

Vector read_weights(const std::string& path, const std::vector<std::string>& assets) {
    const std::string text = detail::read_file(path);
    std::istringstream ss(text);
    std::string line;
    std::map<std::string, double> by_label;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        if (detail::trim(line).empty() || line_no == 1) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() < 2) fail(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": expected asset,weight");
        try {
            by_label[cells[0]] = std::stod(cells[1]);
        } catch (const std::exception&) {
            fail(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ", column 2: not a number");
        }
    }
    Vector w(static_cast<Index>(assets.size()));
    for (std::size_t i = 0; i < assets.size(); ++i) {
        auto it = by_label.find(assets[i]);
        if (it == by_label.end()) fail(ErrorCode::ValidationError, "weights: missing asset " + assets[i]);
        w(static_cast<Index>(i)) = it->second;
    }
    return w;
}

int cmd_decompose(const Options& o) {
    const json cfg = read_config(o);
    const Inputs in = load_inputs(o);
    require(in.model != std::nullopt, ErrorCode::InvalidInput, "decompose needs --model for the loadings");
    const RiskMeasureSpec m = measure_of(o);
    Vector y;
    if (!o.weights.empty()) {
        y = read_weights(o.weights, in.assets);
    } else {
        ProblemSpec p{parse_kind(o.kind), in.budgets, m};
        y = solve_with(in, p, solver_config(o, cfg, is_stochastic(m))).portfolio.weights;
    }
    const FactorGeometry geo(in.model->factors);
    RiskDecomposition dec;
    Vector contributions;
    if (in.scenarios) {
        dec = decompose_risk(y, m, *in.scenarios, geo);
        contributions = risk_contributions(m, y, *in.scenarios);
    } else {
        require(m.kind == MeasureKind::Volatility && in.model->covariance.has_value(), ErrorCode::InvalidInput,
                "decompose without --returns needs volatility and a model covariance");
        dec = decompose_risk(y, m, *in.model->covariance, geo);
        contributions = risk_contributions(m, y, *in.model->covariance);
    }
    const Vector w = geo.exposures(y);
    OutputDir out(o.out);
    write_table(out, "weights", in.assets, "asset", {"weight", "risk_contribution"}, {y, contributions});
    write_table(out, "factors", in.factor_labels, "factor", {"exposure", "risk_contribution"},
                {w, factor_contributions(w, dec.factor.grad_s)});
    json meta = run_meta("decompose", o, m, in.budgets);
    meta["decomposition"] = {{"total_risk", dec.term_i + dec.term_ii},
                             {"excess_risk", dec.term_i},
                             {"factor_risk", dec.term_ii},
                             {"factor_optimal_exposures", vector_json(dec.factor.y_star)}};
    out.write_json("summary.json", meta);
    out.finish();
    return 0;
}

int cmd_grid(const Options& o) {
    const json cfg = read_config(o);
    const Inputs in = load_inputs(o);
    require(in.model != std::nullopt, ErrorCode::InvalidInput, "grid needs --model for the loadings");
    const RiskMeasureSpec m = measure_of(o);
    const SolverConfig sc = solver_config(o, cfg, is_stochastic(m));
    const auto grid = log_grid(o.grid_lo, o.grid_hi, o.grid_n);
    GridTable table;
    if (in.scenarios) {
        table = lambda_grid_search(*in.scenarios, m, in.model->factors, in.budgets, grid, sc);
    } else {
        require(m.kind == MeasureKind::Volatility && in.model->covariance.has_value(), ErrorCode::InvalidInput,
                "grid without --returns needs volatility and a model covariance");
        table = lambda_grid_search(*in.model->covariance, m, in.model->factors, in.budgets, grid, sc);
    }
    std::string text = "lambda_asset,lambda_factor,asset_score,factor_score,combined,asset_l1,factor_l1,error\n";
    for (const auto& p : table.points) {
        text += format_full(p.lambda_asset) + "," + format_full(p.lambda_factor) + ",";
        if (p.scores)
            text += format_full(p.scores->asset_score) + "," + format_full(p.scores->factor_score) + "," +
                    format_full(p.scores->combined) + "," + (p.scores->asset_l1 ? "1" : "0") + "," +
                    (p.scores->factor_l1 ? "1" : "0") + ",";
        else
            text += ",,,,,";
        text += detail::csv_quote(p.error) + "\n";
    }
    OutputDir out(o.out);
    out.write("grid.csv", text);
    json meta = run_meta("grid", o, m, in.budgets);
    if (table.best) {
        const auto& b = table.points[*table.best];
        meta["best"] = {{"lambda_asset", b.lambda_asset},
                        {"lambda_factor", b.lambda_factor},
                        {"asset_score", b.scores->asset_score},
                        {"factor_score", b.scores->factor_score},
                        {"combined", b.scores->combined},
                        {"weights", vector_json(b.result->portfolio.weights)}};
    } else {
        meta["best"] = nullptr;
    }
    out.write_json("summary.json", meta);
    out.finish();
    require(table.best.has_value(), ErrorCode::InvalidInput, "every grid point failed");
    return 0;
}

int cmd_backtest(const Options& o) {
    const json cfg = read_config(o);
    require(!o.returns.empty(), ErrorCode::InvalidInput, "backtest needs --returns");
    const ScenarioSet returns = load_returns_csv(o.returns, parse_period(o.period));
    std::optional<ScenarioSet> proxies;
    if (!o.factors.empty()) proxies = load_returns_csv(o.factors, parse_period(o.period));
    std::optional<ModelInputs> model;
    if (!o.model.empty()) model = load_model_json(o.model);

    BacktestConfig bc;
    const Index d = returns.assets();
    Index m = proxies ? proxies->assets() : (model ? model->factors.factors() : 0);
    bc.strategy.budgets = BudgetSpec::uniform(d, std::max<Index>(m, 1));
    if (m == 0) bc.strategy.budgets.factor_budgets.resize(0);
    if (model) {
        bc.fixed_factors = model->factors;
        bc.strategy.budgets = model->budgets;
    }
    std::string kind = o.kind;
    std::string measure = o.measure;
    double alpha = o.alpha;
    try {
        bc.lookback = cfg.value("lookback", bc.lookback);
        if (cfg.contains("rebalance")) bc.rebalance = parse_frequency(cfg["rebalance"].get<std::string>());
        if (cfg.contains("estimation")) bc.estimation = parse_frequency(cfg["estimation"].get<std::string>());
        bc.pvalue_threshold = cfg.value("pvalue_threshold", bc.pvalue_threshold);
        if (cfg.contains("costs")) {
            const json& c = cfg["costs"];
            bc.costs = Vector::Zero(d);
            if (c.is_array()) {
                bc.costs = detail::json_vector(c, "costs");
            } else if (c.is_object()) {
                // {"by_class": {"bond": 1e-4, ...}, "classes": {"asset": "bond", ...}}
                const json& spreads = c.at("by_class");
                const json& classes = c.at("classes");
                for (Index i = 0; i < d; ++i) {
                    const std::string& label = returns.labels()[static_cast<std::size_t>(i)];
                    if (!classes.contains(label)) fail(ErrorCode::SchemaError, "costs: no class for asset " + label);
                    bc.costs(i) = spreads.at(classes[label].get<std::string>()).get<double>();
                }
            } else {
                fail(ErrorCode::SchemaError, "costs: expected an array or an object");
            }
        }
        if (cfg.contains("strategy")) {
            const json& s = cfg["strategy"];
            kind = s.value("kind", kind);
            measure = s.value("measure", measure);
            alpha = s.value("alpha", alpha);
            if (s.contains("asset_budgets"))
                bc.strategy.budgets.asset_budgets = detail::json_vector(s["asset_budgets"], "asset_budgets");
            if (s.contains("factor_budgets"))
                bc.strategy.budgets.factor_budgets = detail::json_vector(s["factor_budgets"], "factor_budgets");
            bc.strategy.budgets.lambda_asset = s.value("lambda_asset", bc.strategy.budgets.lambda_asset);
            bc.strategy.budgets.lambda_factor = s.value("lambda_factor", bc.strategy.budgets.lambda_factor);
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaError, o.config + ": " + e.what());
    }
    // Flags given explicitly win over the config file.
    if (o.lookback) bc.lookback = *o.lookback;
    if (!o.rebalance.empty()) bc.rebalance = parse_frequency(o.rebalance);
    if (o.lambda_asset) bc.strategy.budgets.lambda_asset = *o.lambda_asset;
    if (o.lambda_factor) bc.strategy.budgets.lambda_factor = *o.lambda_factor;
    Options eff = o;
    eff.kind = kind;
    eff.measure = measure;
    eff.alpha = alpha;
    bc.strategy.kind = parse_kind(kind);
    bc.strategy.measure = measure_of(eff);
    require(bc.strategy.budgets.asset_budgets.size() == d, ErrorCode::ValidationError,
            "budget-sum: asset budgets need one entry per asset");
    require_budgets(bc.strategy.budgets, d, bc.strategy.budgets.factor_budgets.size(), true,
                    bc.strategy.budgets.factor_budgets.size() > 0);
    bc.solver = solver_config(eff, cfg, is_stochastic(bc.strategy.measure));

    const BacktestResult r = run_backtest(returns, proxies, bc);
    const BacktestStats stats = summary_stats(r);
    OutputDir out(o.out);
    json meta = run_meta("backtest", eff, bc.strategy.measure, bc.strategy.budgets);
    meta["kind"] = kind;
    meta["lookback"] = bc.lookback;
    meta["rebalance"] = frequency_name(bc.rebalance);
    meta["estimation"] = frequency_name(bc.estimation);
    emit_backtest(out, r, stats, meta);
    out.finish();
    return 0;
}

int cmd_compare(const Options& o) {
    const json cfg = read_config(o);
    Inputs in = load_inputs(o);
    require(in.model != std::nullopt, ErrorCode::InvalidInput, "compare needs --model for the loadings");
    if (!o.lambda_asset) in.budgets.lambda_asset = 0.3;
    if (!o.lambda_factor) in.budgets.lambda_factor = 0.7;
    const RiskMeasureSpec m = measure_of(o);
    const SolverConfig sc = solver_config(o, cfg, is_stochastic(m));
    const BudgetSpec equal =
        BudgetSpec::uniform(static_cast<Index>(in.assets.size()), static_cast<Index>(in.factor_labels.size()),
                            in.budgets.lambda_asset, in.budgets.lambda_factor);
    const std::vector<std::pair<std::string, ProblemKind>> zoo = {
        {"MV", ProblemKind::MinVariance},  {"MV+", ProblemKind::MinVarianceLongOnly},
        {"EW", ProblemKind::EqualWeight},  {"ERC", ProblemKind::RB},
        {"EFRC", ProblemKind::FRB},        {"EFRC+", ProblemKind::FRBLongOnly},
        {"EAFRC", ProblemKind::AFRB}};

    std::vector<std::string> names;
    std::vector<SolveResult> results;
    for (const auto& [name, kind] : zoo) {
        ProblemSpec p{kind, equal, m};
        // Reference portfolios are reported under the chosen measure.
        SolveResult r = solve_with(in, p, sc);
        if (kind == ProblemKind::MinVariance || kind == ProblemKind::MinVarianceLongOnly) {
            if (in.scenarios && m.kind != MeasureKind::Volatility) {
                const FactorGeometry geo(in.model->factors);
                r = detail::assemble(r.portfolio.weights, m, *in.scenarios, &geo, sc.factor);
                r.converged = true;
            }
        }
        names.push_back(name);
        results.push_back(std::move(r));
    }

    OutputDir out(o.out);
    std::vector<Vector> weights, asset_rc, factor_rc, exposures;
    for (const auto& r : results) {
        weights.push_back(r.portfolio.weights);
        asset_rc.push_back(r.asset_contributions);
        factor_rc.push_back(r.factor_contributions);
        exposures.push_back(r.factor_exposures);
    }
    write_table(out, "weights", in.assets, "asset", names, weights);
    write_table(out, "asset_contributions", in.assets, "asset", names, asset_rc);
    write_table(out, "factor_exposures", in.factor_labels, "factor", names, exposures);
    write_table(out, "factor_contributions", in.factor_labels, "factor", names, factor_rc);

    const double annualize = std::sqrt(periods_per_year(in.period));
    std::string risk = "portfolio,risk,annualized_risk,factor_risk\n";
    for (std::size_t i = 0; i < names.size(); ++i)
        risk += names[i] + "," + format_full(results[i].total_risk) + "," +
                format_full(results[i].total_risk * annualize) + "," + format_full(results[i].factor_risk) + "\n";
    out.write("risk.csv", risk);

    std::vector<std::pair<std::string, LorenzCurve>> lw, la, lf;
    for (std::size_t i = 0; i < names.size(); ++i) {
        lw.emplace_back(names[i], lorenz(weights[i]));
        la.emplace_back(names[i], lorenz(asset_rc[i]));
        lf.emplace_back(names[i], lorenz(factor_rc[i]));
    }
    out.write("lorenz_weights.csv", lorenz_csv(lw));
    out.write("lorenz_asset_contributions.csv", lorenz_csv(la));
    out.write("lorenz_factor_contributions.csv", lorenz_csv(lf));

    const Matrix coords = pca_embed(weights);
    std::string pca = "portfolio,pc1,pc2\n";
    for (std::size_t i = 0; i < names.size(); ++i)
        pca += names[i] + "," + format_full(coords(static_cast<Index>(i), 0)) + "," +
               format_full(coords(static_cast<Index>(i), 1)) + "\n";
    out.write("pca.csv", pca);

    json meta = run_meta("compare", o, m, equal);
    json status = json::object();
    for (std::size_t i = 0; i < names.size(); ++i)
        status[names[i]] = {{"converged", results[i].converged}, {"residual", results[i].residual}};
    meta["portfolios"] = status;
    out.write_json("summary.json", meta);
    out.finish();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (!results[i].converged) throw NotConverged{names[i] + " did not converge"};
    return 0;
}

void add_common(CLI::App* app, Options& o) {
    app->add_option("--returns", o.returns, "Returns CSV (date column, one column per asset)");
    app->add_option("--model", o.model, "Model JSON (loadings, covariance, budgets)");
    app->add_option("--config", o.config, "JSON configuration; flags override its values");
    app->add_option("--measure", o.measure, "Risk measure")->check(CLI::IsMember({"vol", "es"}));
    app->add_option("--alpha", o.alpha, "Expected Shortfall confidence level")->check(CLI::Range(0.5, 0.9999));
    app->add_option("--kind", o.kind, "Portfolio kind")
        ->check(CLI::IsMember({"rb", "frb", "frb-long", "afrb", "mv", "mv-long", "ew"}));
    app->add_option("--lambda-asset", o.lambda_asset, "Asset importance parameter");
    app->add_option("--lambda-factor", o.lambda_factor, "Factor importance parameter");
    app->add_option("--seed", o.seed, "Seed for stochastic solvers");
    app->add_option("--out", o.out, "Output directory");
    app->add_option("--period", o.period, "Row period of the returns CSV")
        ->check(CLI::IsMember({"daily", "weekly", "monthly", "annual"}));
    app->add_option("--iterations", o.iterations, "Maximum solver iterations");
    app->add_option("--step", o.step, "Step-size constant for stochastic solvers");
    app->add_option("--batch", o.batch, "Mini-batch size for stochastic solvers");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk budgeting portfolios across assets and factors"};
    app.require_subcommand(1);
    Options o;
    auto* solve_cmd = app.add_subcommand("solve", "Solve one portfolio");
    auto* decompose_cmd = app.add_subcommand("decompose", "Split portfolio risk into factor and excess parts");
    auto* grid_cmd = app.add_subcommand("grid", "Grid search over the asset/factor importance parameters");
    auto* backtest_cmd = app.add_subcommand("backtest", "Rolling-window backtest of a strategy");
    auto* compare_cmd = app.add_subcommand("compare", "Compare MV, MV+, EW, ERC, EFRC, EFRC+ and EAFRC");
    for (auto* c : {solve_cmd, decompose_cmd, grid_cmd, backtest_cmd, compare_cmd}) add_common(c, o);
    decompose_cmd->add_option("--weights", o.weights, "CSV of asset,weight to decompose (default: solve --kind)");
    grid_cmd->add_option("--grid-min", o.grid_lo, "Smallest lambda on each axis");
    grid_cmd->add_option("--grid-max", o.grid_hi, "Largest lambda on each axis");
    grid_cmd->add_option("--grid-points", o.grid_n, "Points per axis (logarithmic spacing)");
    backtest_cmd->add_option("--factors", o.factors, "Factor proxy returns CSV, aligned with --returns");
    backtest_cmd->add_option("--lookback", o.lookback, "Lookback window in rows");
    backtest_cmd->add_option("--rebalance", o.rebalance, "Rebalance frequency")
        ->check(CLI::IsMember({"daily", "weekly", "monthly"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*solve_cmd) return cmd_solve(o);
        if (*decompose_cmd) return cmd_decompose(o);
        if (*grid_cmd) return cmd_grid(o);
        if (*backtest_cmd) return cmd_backtest(o);
        if (*compare_cmd) return cmd_compare(o);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", std::string(e.name()).c_str(), e.what());
        return 1;
    } catch (const NotConverged& e) {
        std::fprintf(stderr, "error: MaxIterations: %s\n", e.what.c_str());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: Internal: %s\n", e.what());
        return 1;
    }
    return 0;
}
