#include "bullbear/market_data.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "bullbear/errors.hpp"

namespace bullbear {

const char* to_string(Regime r) { return r == Regime::Bull ? "bull" : "bear"; }

void PriceSeries::validate() const {
    if (asset_ids.empty()) throw InvalidParams("price series has no assets");
    if (dates.size() < 2) throw EmptySeries("price series needs at least 2 days, has " + std::to_string(dates.size()));
    if (static_cast<std::size_t>(prices.rows()) != dates.size() ||
        static_cast<std::size_t>(prices.cols()) != asset_ids.size())
        throw InvalidParams("price matrix shape does not match dates x assets");
    for (std::size_t t = 1; t < dates.size(); ++t) {
        if (!(dates[t - 1] < dates[t])) throw InvalidParams("dates not strictly increasing at " + dates[t].to_string());
    }
    if (!prices.allFinite() || prices.minCoeff() <= 0.0) throw InvalidParams("prices must be finite and > 0");
}

PriceSeries PriceSeries::slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, days());
    if (begin > end) begin = end;
    PriceSeries out;
    out.asset_ids = asset_ids;
    out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(begin), dates.begin() + static_cast<std::ptrdiff_t>(end));
    out.prices = prices.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    return out;
}

std::size_t PriceSeries::lower_bound(Date d) const {
    return static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), d) - dates.begin());
}

PriceSeries PriceSeries::between(Date first, Date last) const {
    auto begin = lower_bound(first);
    auto end = static_cast<std::size_t>(std::upper_bound(dates.begin(), dates.end(), last) - dates.begin());
    return slice(begin, end);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

void write_price(std::ostream& os, double v) { os << std::setprecision(17) << v; }

}  // namespace

CsvLoad load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(path.string());

    std::string line;
    if (!std::getline(in, line)) throw EmptySeries("empty file: " + path.string());
    auto header = split(line);
    if (header.size() < 2 || header[0] != "date") throw ParseError(1, 1, "header must be date,TICKER,...");
    CsvLoad out;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].empty()) throw ParseError(1, c + 1, "empty ticker");
        out.series.asset_ids.emplace_back(header[c]);
    }
    const std::size_t n_assets = out.series.asset_ids.size();

    std::vector<std::pair<Date, std::vector<double>>> rows;
    std::set<Date> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (cells.size() != n_assets + 1)
            throw ParseError(line_no, std::min(cells.size(), n_assets + 1) + 1,
                             "expected " + std::to_string(n_assets + 1) + " cells, got " + std::to_string(cells.size()));
        auto date = Date::parse(cells[0]);
        if (!date) throw ParseError(line_no, 1, "bad date '" + std::string(cells[0]) + "'");
        if (!seen.insert(*date).second) throw ParseError(line_no, 1, "duplicate date " + date->to_string());

        std::vector<double> values(n_assets);
        std::optional<RejectedRow> reject;
        for (std::size_t c = 0; c < n_assets && !reject; ++c) {
            auto v = parse_double(cells[c + 1]);
            if (!v) {
                reject = RejectedRow{line_no, c + 2, "non-numeric price '" + std::string(cells[c + 1]) + "'"};
            } else if (*v <= 0.0) {
                reject = RejectedRow{line_no, c + 2, "non-positive price " + std::string(cells[c + 1])};
            } else {
                values[c] = *v;
            }
        }
        if (reject) {
            out.rejected.push_back(std::move(*reject));
            continue;
        }
        rows.emplace_back(*date, std::move(values));
    }

    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (rows.size() < 2)
        throw EmptySeries(path.string() + ": fewer than 2 valid rows after cleaning");

    out.series.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_assets));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.series.dates.push_back(rows[r].first);
        for (std::size_t c = 0; c < n_assets; ++c)
            out.series.prices(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].second[c];
    }
    return out;
}

void write_csv(const PriceSeries& ps, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "date";
    for (const auto& id : ps.asset_ids) os << ',' << id;
    os << '\n';
    for (std::size_t t = 0; t < ps.days(); ++t) {
        os << ps.dates[t].to_string();
        for (Eigen::Index i = 0; i < ps.prices.cols(); ++i) {
            os << ',';
            write_price(os, ps.prices(static_cast<Eigen::Index>(t), i));
        }
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path.string());
}

PriceSeries align_and_clean(const std::vector<AssetHistory>& raw) {
    if (raw.empty()) throw EmptySeries("no assets to align");

    std::vector<std::map<Date, double>> series(raw.size());
    Date common_first{};
    Date common_last{};
    for (std::size_t i = 0; i < raw.size(); ++i) {
        for (const auto& [d, p] : raw[i].observations) {
            if (std::isfinite(p) && p > 0.0) series[i][d] = p;
        }
        if (series[i].empty()) throw EmptySeries("asset " + raw[i].id + " has no valid observations");
        Date first = series[i].begin()->first;
        Date last = series[i].rbegin()->first;
        if (i == 0 || common_first < first) common_first = first;
        if (i == 0 || last < common_last) common_last = last;
    }

    std::set<Date> calendar;
    for (const auto& s : series) {
        for (auto it = s.lower_bound(common_first); it != s.end() && !(common_last < it->first); ++it)
            calendar.insert(it->first);
    }
    if (calendar.size() < 2) throw EmptySeries("common date range has fewer than 2 days");

    PriceSeries out;
    for (const auto& a : raw) out.asset_ids.push_back(a.id);
    out.dates.assign(calendar.begin(), calendar.end());
    out.prices.resize(static_cast<Eigen::Index>(out.dates.size()), static_cast<Eigen::Index>(raw.size()));
    for (std::size_t i = 0; i < series.size(); ++i) {
        double last_seen = 0.0;
        auto it = series[i].begin();
        for (std::size_t t = 0; t < out.dates.size(); ++t) {
            while (it != series[i].end() && !(out.dates[t] < it->first)) {
                last_seen = it->second;
                ++it;
            }
            out.prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = last_seen;
        }
    }
    return out;
}

ReturnSeries simple_returns(const PriceSeries& ps) {
    ps.validate();
    const auto rows = ps.prices.rows() - 1;
    ReturnSeries out;
    out.asset_ids = ps.asset_ids;
    out.dates.assign(ps.dates.begin() + 1, ps.dates.end());
    out.returns = ps.prices.bottomRows(rows).cwiseQuotient(ps.prices.topRows(rows)).array() - 1.0;
    return out;
}

void GbmParams::validate() const {
    auto n = static_cast<Eigen::Index>(d);
    if (d < 1) throw InvalidParams("need at least one asset");
    if (t < 2) throw InvalidParams("need at least two days");
    if (days_per_year < 1) throw InvalidParams("days_per_year must be positive");
    if (p0.size() != 0 && (p0.size() != n || p0.minCoeff() <= 0.0))
        throw InvalidParams("p0 must have one positive entry per asset");
    for (const Vector* v : {&mu_bull, &mu_bear, &sigma_bull, &sigma_bear}) {
        if (v->size() != n) throw InvalidParams("drift/volatility vectors must have one entry per asset");
        if (!v->allFinite()) throw InvalidParams("drift/volatility must be finite");
    }
    if (sigma_bull.minCoeff() < 0.0 || sigma_bear.minCoeff() < 0.0) throw InvalidParams("sigma must be >= 0");
    if (!(regime_switch_prob >= 0.0 && regime_switch_prob <= 1.0))
        throw InvalidParams("regime_switch_prob must lie in [0, 1]");
    if (corr.size() != 0) {
        if (corr.rows() != n || corr.cols() != n) throw InvalidParams("corr must be d x d");
        if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw InvalidParams("corr must be symmetric");
        if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
            throw InvalidParams("corr must have unit diagonal");
    }
}

namespace {

/// Factor F with F F^T = corr; eigen route so singular PSD matrices work.
Matrix correlation_factor(const Matrix& corr) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(corr);
    if (eig.info() != Eigen::Success) throw InvalidParams("correlation factorization failed");
    if (eig.eigenvalues().minCoeff() < -1e-10)
        throw InvalidParams("correlation matrix is not positive semi-definite");
    Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

SyntheticMarket synth_market(const GbmParams& params) {
    params.validate();
    const auto n = static_cast<Eigen::Index>(params.d);
    const auto days = static_cast<Eigen::Index>(params.t);
    const Matrix factor = params.corr.size() == 0 ? Matrix(Matrix::Identity(n, n)) : correlation_factor(params.corr);
    const Vector p0 = params.p0.size() == 0 ? Vector(Vector::Constant(n, 100.0)) : params.p0;
    const double dt = 1.0 / params.days_per_year;

    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    SyntheticMarket out;
    out.series.asset_ids.reserve(params.d);
    for (std::size_t i = 0; i < params.d; ++i) out.series.asset_ids.push_back("S" + std::to_string(i + 1));
    out.series.dates = business_days(params.start_date, params.t);
    out.series.prices.resize(days, n);
    out.regimes.resize(params.t);

    Vector log_growth = Vector::Zero(n);
    out.series.prices.row(0) = p0.transpose();
    Regime regime = params.initial_regime;
    out.regimes[0] = regime;
    Vector z(n);
    for (Eigen::Index t = 1; t < days; ++t) {
        if (uniform(rng) < params.regime_switch_prob) regime = regime == Regime::Bull ? Regime::Bear : Regime::Bull;
        out.regimes[static_cast<std::size_t>(t)] = regime;
        const Vector& mu = regime == Regime::Bull ? params.mu_bull : params.mu_bear;
        const Vector& sigma = regime == Regime::Bull ? params.sigma_bull : params.sigma_bear;
        for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
        Vector shock = factor * z;
        log_growth.array() +=
            (mu.array() - 0.5 * sigma.array().square()) * dt + sigma.array() * std::sqrt(dt) * shock.array();
        out.series.prices.row(t) = (p0.array() * log_growth.array().exp()).transpose();
    }
    return out;
}

void write_regime_csv(const std::vector<Date>& dates, const std::vector<Regime>& regimes,
                      const std::filesystem::path& path) {
    if (dates.size() != regimes.size()) throw InvalidParams("dates and regimes differ in length");
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "date,regime\n";
    for (std::size_t t = 0; t < dates.size(); ++t) os << dates[t].to_string() << ',' << to_string(regimes[t]) << '\n';
    if (!os) throw IoError("write failed: " + path.string());
}

std::vector<Regime> read_regime_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(path.string());
    std::string line;
    std::getline(in, line);
    std::vector<Regime> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto cells = split(line);
        if (cells.size() != 2) throw ParseError(line_no, 1, "expected date,regime");
        if (cells[1] == "bull") out.push_back(Regime::Bull);
        else if (cells[1] == "bear") out.push_back(Regime::Bear);
        else throw ParseError(line_no, 2, "regime must be bull or bear");
    }
    return out;
}

std::vector<double> index_series(const PriceSeries& ps) {
    ps.validate();
    const Vector level = ps.prices.rowwise().sum();
    const double divisor = level(0) / 100.0;
    std::vector<double> out(static_cast<std::size_t>(level.size()));
    for (Eigen::Index t = 0; t < level.size(); ++t) out[static_cast<std::size_t>(t)] = level(t) / divisor;
    return out;
}

}  // namespace bullbear
