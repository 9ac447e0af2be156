#pragma once

// Data ingestion and result serialization: returns CSV, model JSON, and an
// output directory of CSV/JSON files described by a hashed manifest.

#include "rbf/analytics.hpp"
#include "rbf/backtest.hpp"
#include "rbf/detail/dates.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace rbf {

using json = nlohmann::json;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

/// Quotes a field when it holds a comma or a quote.
inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::IoError, "SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

}  // namespace detail

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Percent with two decimals, without a negative zero.
inline std::string format_percent(double fraction) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

// ---------------------------------------------------------------------------
// Returns CSV: header "date,<asset>,...", one ISO-dated row per period.

inline ScenarioSet parse_returns_csv(const std::string& text, PeriodLength period = PeriodLength::Daily,
                                     const std::string& source = "returns") {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) {
            header = detail::split_csv_line(line);
            break;
        }
    }
    if (header.size() < 2) fail(ErrorCode::ParseError, source + ": header needs a date column and at least one asset");
    const std::vector<std::string> labels(header.begin() + 1, header.end());
    const std::size_t d = labels.size();

    std::vector<std::string> dates;
    std::vector<double> values;
    std::optional<std::chrono::sys_days> prev;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        const std::string where = source + ":" + std::to_string(line_no);
        if (cells.size() != d + 1)
            fail(ErrorCode::ParseError, where + ": expected " + std::to_string(d + 1) + " columns, got " +
                                            std::to_string(cells.size()));
        const auto day = detail::parse_iso_date(cells[0]);
        if (!day) fail(ErrorCode::ParseError, where + ", column 1: not an ISO-8601 date '" + cells[0] + "'");
        if (prev && *day <= *prev)
            fail(ErrorCode::NonMonotoneDates, where + ": date " + cells[0] + " does not follow " + dates.back());
        prev = day;
        dates.push_back(cells[0]);
        for (std::size_t c = 1; c <= d; ++c) {
            const std::string& cell = cells[c];
            const std::string at = where + ", column " + std::to_string(c + 1);
            double v = 0.0;
            std::size_t used = 0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                fail(ErrorCode::ParseError, at + ": not a number '" + cell + "'");
            }
            if (used != cell.size()) fail(ErrorCode::ParseError, at + ": trailing characters in '" + cell + "'");
            if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, at + ": non-finite value '" + cell + "'");
            values.push_back(v);
        }
    }
    const Index n = static_cast<Index>(dates.size());
    if (n < 2) fail(ErrorCode::ParseError, source + ": needs at least two data rows");
    Matrix x(n, static_cast<Index>(d));
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < static_cast<Index>(d); ++c)
            x(r, c) = values[static_cast<std::size_t>(r) * d + static_cast<std::size_t>(c)];
    return ScenarioSet(std::move(x), period, labels, std::move(dates));
}

inline ScenarioSet load_returns_csv(const std::filesystem::path& path, PeriodLength period = PeriodLength::Daily) {
    return parse_returns_csv(detail::read_file(path), period, path.string());
}

inline std::string returns_csv_text(const ScenarioSet& s) {
    require(s.has_dates(), ErrorCode::InvalidInput, "returns CSV needs dates");
    std::string out = "date";
    for (const auto& l : s.labels()) out += "," + l;
    out += "\n";
    for (Index r = 0; r < s.rows(); ++r) {
        out += s.dates()[static_cast<std::size_t>(r)];
        for (Index c = 0; c < s.assets(); ++c) out += "," + format_full(s.returns()(r, c));
        out += "\n";
    }
    return out;
}

inline void save_returns_csv(const ScenarioSet& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << returns_csv_text(s);
}

// ---------------------------------------------------------------------------
// Model JSON

struct ModelInputs {
    std::vector<std::string> assets;
    FactorModel factors;
    std::optional<CovarianceModel> covariance;
    BudgetSpec budgets;
    PeriodLength period = PeriodLength::Annual;
};

namespace detail {

inline Matrix json_matrix(const json& j, const std::string& key) {
    if (!j.is_array() || j.empty()) fail(ErrorCode::SchemaError, key + ": expected a non-empty array of rows");
    const std::size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty()) fail(ErrorCode::SchemaError, key + ": rows must be non-empty arrays");
    const std::size_t cols = j[0].size();
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            fail(ErrorCode::SchemaError, key + ": dimension: row " + std::to_string(r) + " has the wrong length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) fail(ErrorCode::SchemaError, key + ": entries must be numbers");
            m(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

inline Vector json_vector(const json& j, const std::string& key) {
    if (!j.is_array() || j.empty()) fail(ErrorCode::SchemaError, key + ": expected a non-empty array");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) fail(ErrorCode::SchemaError, key + ": entries must be numbers");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline std::vector<std::string> json_strings(const json& j, const std::string& key) {
    if (!j.is_array()) fail(ErrorCode::SchemaError, key + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) fail(ErrorCode::SchemaError, key + ": expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline PeriodLength parse_period(const std::string& s) {
    if (s == "daily") return PeriodLength::Daily;
    if (s == "weekly") return PeriodLength::Weekly;
    if (s == "monthly") return PeriodLength::Monthly;
    if (s == "annual") return PeriodLength::Annual;
    fail(ErrorCode::SchemaError, "period: unknown value '" + s + "'");
}

inline void dimension(bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCode::SchemaError, "dimension: " + msg);
}

}  // namespace detail

inline ModelInputs parse_model_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::SchemaError, "model must be a JSON object");
    if (!j.contains("beta")) fail(ErrorCode::SchemaError, "beta: missing");
    const Matrix beta = detail::json_matrix(j["beta"], "beta");
    const Index d = beta.rows();
    const Index m = beta.cols();

    ModelInputs out;
    out.assets = j.contains("assets") ? detail::json_strings(j["assets"], "assets") : default_labels("A", d);
    detail::dimension(static_cast<Index>(out.assets.size()) == d,
                      "beta has " + std::to_string(d) + " rows but " + std::to_string(out.assets.size()) +
                          " assets are listed (beta is assets x factors)");
    const auto factor_labels = j.contains("factors") ? detail::json_strings(j["factors"], "factors")
                                                     : default_labels("F", m);
    detail::dimension(static_cast<Index>(factor_labels.size()) == m,
                      "beta has " + std::to_string(m) + " columns but " + std::to_string(factor_labels.size()) +
                          " factors are listed");

    if (j.contains("sigma")) {
        const Matrix sigma = detail::json_matrix(j["sigma"], "sigma");
        detail::dimension(sigma.rows() == d && sigma.cols() == d, "sigma must be assets x assets and match beta");
        out.covariance.emplace(sigma, CovarianceSource::UserSupplied);
    } else if (j.contains("sigma_f") || j.contains("sigma_idio")) {
        if (!j.contains("sigma_f") || !j.contains("sigma_idio"))
            fail(ErrorCode::SchemaError, "sigma_f and sigma_idio must be given together");
        const Matrix sf = detail::json_matrix(j["sigma_f"], "sigma_f");
        const Vector si = detail::json_vector(j["sigma_idio"], "sigma_idio");
        detail::dimension(sf.rows() == m && sf.cols() == m, "sigma_f must be factors x factors");
        detail::dimension(si.size() == d, "sigma_idio must have one entry per asset");
        out.covariance = structured_covariance(FactorModel(beta, factor_labels), sf, si);
    }

    const double la = j.value("lambda_asset", 1.0);
    const double lf = j.value("lambda_factor", 1.0);
    out.budgets = BudgetSpec::uniform(d, m, la, lf);
    if (j.contains("asset_budgets")) out.budgets.asset_budgets = detail::json_vector(j["asset_budgets"], "asset_budgets");
    if (j.contains("factor_budgets"))
        out.budgets.factor_budgets = detail::json_vector(j["factor_budgets"], "factor_budgets");
    detail::dimension(out.budgets.asset_budgets.size() == d, "asset_budgets must have one entry per asset");
    detail::dimension(out.budgets.factor_budgets.size() == m, "factor_budgets must have one entry per factor");
    if (!(la > 0.0) || !(lf > 0.0)) fail(ErrorCode::ValidationError, "lambda-positive: importance parameters must be > 0");
    require_budgets(out.budgets, d, m, true, true);

    out.factors = FactorModel(beta, factor_labels);
    const auto report = validate_model(out.factors);
    for (const auto& c : report.checks)
        if (!c.passed) fail(ErrorCode::ValidationError, c.name + ": " + c.detail);
    if (j.contains("period")) {
        if (!j["period"].is_string()) fail(ErrorCode::SchemaError, "period: expected a string");
        out.period = detail::parse_period(j["period"].get<std::string>());
    }
    return out;
}

inline ModelInputs load_model_json(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
    return parse_model_json(j);
}

// ---------------------------------------------------------------------------
// Output directory with manifest

struct ManifestEntry {
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
};

class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec || !std::filesystem::is_directory(root_))
            fail(ErrorCode::IoError, "cannot create output directory " + root_.string());
    }

    void write(const std::string& name, const std::string& content) {
        const auto path = root_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
        out << content;
        out.close();
        if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
        files_[name] = {name, detail::sha256_hex(content), content.size()};
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    /// Writes manifest.json listing every file written so far, by name.
    std::vector<ManifestEntry> finish() {
        json j = json::array();
        std::vector<ManifestEntry> entries;
        for (const auto& [name, e] : files_) {
            j.push_back({{"file", e.name}, {"sha256", e.sha256}, {"bytes", e.bytes}});
            entries.push_back(e);
        }
        const std::string text = json{{"files", j}}.dump(2) + "\n";
        std::ofstream out(root_ / "manifest.json", std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::IoError, "cannot write manifest");
        out << text;
        return entries;
    }

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    std::map<std::string, ManifestEntry> files_;
};

/// Two-tier table: percent display with two decimals plus a full-precision
/// sidecar holding the raw fractions.
inline void write_table(OutputDir& out, const std::string& stem, const std::vector<std::string>& row_labels,
                        const std::string& key, const std::vector<std::string>& columns,
                        const std::vector<Vector>& data) {
    std::string display = key;
    std::string full = key;
    for (const auto& c : columns) {
        display += "," + c;
        full += "," + c;
    }
    display += "\n";
    full += "\n";
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
        display += row_labels[r];
        full += row_labels[r];
        for (const auto& col : data) {
            const bool present = static_cast<std::size_t>(col.size()) > r;
            display += "," + (present ? format_percent(col(static_cast<Index>(r))) : std::string());
            full += "," + (present ? format_full(col(static_cast<Index>(r))) : std::string());
        }
        display += "\n";
        full += "\n";
    }
    out.write(stem + ".csv", display);
    out.write(stem + "_full.csv", full);
}

inline json vector_json(const Vector& v) {
    json j = json::array();
    for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

inline json solve_summary_json(const SolveResult& r) {
    return json{{"total_risk", r.total_risk},
                {"factor_risk", r.factor_risk},
                {"zeta", r.zeta},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"residual", r.residual},
                {"weights", vector_json(r.portfolio.weights)},
                {"asset_contributions", vector_json(r.asset_contributions)},
                {"factor_exposures", vector_json(r.factor_exposures)},
                {"factor_contributions", vector_json(r.factor_contributions)}};
}

inline void emit_solve(OutputDir& out, const SolveResult& r, const std::vector<std::string>& assets,
                       const std::vector<std::string>& factors, json meta) {
    write_table(out, "weights", assets, "asset", {"weight", "risk_contribution"},
                {r.portfolio.weights, r.asset_contributions});
    if (r.factor_exposures.size() > 0)
        write_table(out, "factors", factors, "factor", {"exposure", "risk_contribution"},
                    {r.factor_exposures, r.factor_contributions});
    meta["result"] = solve_summary_json(r);
    out.write_json("summary.json", meta);
}

inline void emit_backtest(OutputDir& out, const BacktestResult& r, const BacktestStats& stats, json meta) {
    std::string nav = "date,nav\n";
    for (std::size_t i = 0; i < r.nav.size(); ++i) nav += r.nav_dates[i] + "," + format_full(r.nav[i]) + "\n";
    out.write("nav.csv", nav);

    auto history = [&](const std::string& name, const std::vector<std::string>& labels, auto pick) {
        std::string text = "date";
        for (const auto& l : labels) text += "," + l;
        text += "\n";
        for (const auto& rec : r.rebalances) {
            const Vector& v = pick(rec);
            text += rec.date;
            for (std::size_t i = 0; i < labels.size(); ++i)
                text += "," + (static_cast<std::size_t>(v.size()) > i ? format_full(v(static_cast<Index>(i))) : "");
            text += "\n";
        }
        out.write(name, text);
    };
    history("weights_history.csv", r.asset_labels, [](const RebalanceRecord& x) -> const Vector& { return x.weights; });
    history("asset_contributions_history.csv", r.asset_labels,
            [](const RebalanceRecord& x) -> const Vector& { return x.asset_contributions; });
    if (!r.factor_labels.empty())
        history("factor_contributions_history.csv", r.factor_labels,
                [](const RebalanceRecord& x) -> const Vector& { return x.factor_contributions; });

    std::string events = "date,total_risk,cost_rate,turnover,initial,failure\n";
    for (const auto& rec : r.rebalances)
        events += rec.date + "," + format_full(rec.total_risk) + "," + format_full(rec.cost_rate) + "," +
                  format_full(rec.turnover) + "," + (rec.initial ? "1" : "0") + "," + detail::csv_quote(rec.failure) + "\n";
    out.write("rebalances.csv", events);

    meta["stats"] = {{"annual_mean", stats.annual_mean},
                     {"annual_volatility", stats.annual_volatility},
                     {"expected_shortfall_daily", stats.expected_shortfall},
                     {"max_drawdown", stats.max_drawdown},
                     {"average_turnover", stats.average_turnover},
                     {"total_costs", r.total_costs},
                     {"final_nav", r.nav.back()},
                     {"rebalances", r.rebalances.size()}};
    out.write_json("summary.json", meta);
}

inline std::string lorenz_csv(const std::vector<std::pair<std::string, LorenzCurve>>& curves) {
    std::string text = "portfolio,population,share\n";
    for (const auto& [label, curve] : curves)
        for (const auto& [x, y] : curve.points) text += label + "," + format_full(x) + "," + format_full(y) + "\n";
    return text;
}

}  // namespace rbf
