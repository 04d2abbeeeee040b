#include "statmicro/calibration.hpp"

#include "statmicro/errors.hpp"
#include "statmicro/optimize.hpp"
#include "statmicro/parallel.hpp"

#include "csv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace statmicro {

namespace {

std::string row_text(int row) { return "row " + std::to_string(row); }

// Seconds since the epoch for an ISO-8601 date or date-time; nullopt when the
// cell is not in that form.
std::optional<double> parse_iso8601(const std::string& cell) {
    int year = 0;
    unsigned month = 0;
    unsigned day = 0;
    int used = 0;
    if (std::sscanf(cell.c_str(), "%4d-%2u-%2u%n", &year, &month, &day, &used) != 3 || used != 10) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) return std::nullopt;
    double seconds = static_cast<double>(std::chrono::sys_days(ymd).time_since_epoch().count()) * 86400.0;
    std::string rest = cell.substr(10);
    if (rest.empty()) return seconds;
    if (rest[0] != 'T' && rest[0] != ' ') return std::nullopt;
    unsigned hh = 0;
    unsigned mm = 0;
    double ss = 0.0;
    int n = 0;
    if (std::sscanf(rest.c_str() + 1, "%2u:%2u:%lf%n", &hh, &mm, &ss, &n) == 3) {
    } else if (std::sscanf(rest.c_str() + 1, "%2u:%2u%n", &hh, &mm, &n) == 2) {
        ss = 0.0;
    } else {
        return std::nullopt;
    }
    if (hh > 23 || mm > 59 || ss < 0.0 || ss >= 61.0) return std::nullopt;
    seconds += hh * 3600.0 + mm * 60.0 + ss;
    rest = rest.substr(1 + static_cast<std::size_t>(n));
    if (rest.empty() || rest == "Z") return seconds;
    int oh = 0;
    unsigned om = 0;
    char sign = rest[0];
    if ((sign == '+' || sign == '-') && std::sscanf(rest.c_str() + 1, "%2d:%2u%n", &oh, &om, &n) == 2 &&
        static_cast<std::size_t>(n) + 1 == rest.size()) {
        const double offset = oh * 3600.0 + om * 60.0;
        return sign == '+' ? seconds - offset : seconds + offset;
    }
    return std::nullopt;
}

double parse_timestamp(const std::string& cell, int row) {
    if (auto iso = parse_iso8601(cell)) return *iso;
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used == cell.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw SchemaError(row_text(row) + ", column 'timestamp': cannot parse '" + cell + "'", row, "timestamp");
}

double parse_price(const std::string& cell, int row, const std::string& column) {
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
        throw SchemaError(row_text(row) + ", column '" + column + "': not a number: '" + cell + "'", row, column);
    }
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw SchemaError(row_text(row) + ", column '" + column + "': price must be positive", row, column);
    }
    return v;
}

Matrix log_deviations(const PriceSeries& series) {
    Matrix x = series.prices.array().log().matrix();
    const Vector mean = x.rowwise().mean();
    x.colwise() -= mean;
    return x;
}

Autocovariance autocovariance_of(const Matrix& x, std::size_t max_lag, double spacing) {
    const auto N = static_cast<std::size_t>(x.rows());
    const auto T = x.cols();
    std::vector<double> lags(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) lags[k] = static_cast<double>(k) * spacing;
    Autocovariance out;
    out.cov = PropagatorTable(N, lags, PropagatorMethod::lattice_fourier);
    out.n_obs = static_cast<std::size_t>(T);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            for (std::size_t k = 0; k <= max_lag; ++k) {
                const auto L = static_cast<Eigen::Index>(k);
                out.cov.at(i, j, k) =
                    x.row(static_cast<Eigen::Index>(i)).head(T - L).dot(x.row(static_cast<Eigen::Index>(j)).tail(T - L)) /
                    static_cast<double>(T);
            }
        }
    }
    out.stderr_diag.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(max_lag + 1));
    for (std::size_t i = 0; i < N; ++i) {
        const double c0 = out.cov.at(i, i, 0);
        const auto ii = static_cast<Eigen::Index>(i);
        if (!(c0 > 0.0)) {
            out.stderr_diag.row(ii).setZero();
            continue;
        }
        out.stderr_diag(ii, 0) = c0 * std::sqrt(2.0 / static_cast<double>(T));
        double acc = 1.0;
        for (std::size_t k = 1; k <= max_lag; ++k) {
            out.stderr_diag(ii, static_cast<Eigen::Index>(k)) = c0 * std::sqrt(acc / static_cast<double>(T));
            const double rho = out.cov.at(i, i, k) / c0;
            acc += 2.0 * rho * rho;
        }
    }
    return out;
}

Vector residuals_for(const Vector& theta, const std::vector<double>& lags, const std::vector<double>& chat,
                     std::size_t count, double m) {
    Vector r(static_cast<Eigen::Index>(count));
    const double kappa = std::exp(theta(0));
    const double mu = std::exp(theta(1));
    const double gamma = std::exp(theta(2));
    try {
        for (std::size_t k = 0; k < count; ++k) {
            r(static_cast<Eigen::Index>(k)) = (channel_propagator(kappa, mu, gamma, m, lags[k]) - chat[k]) / chat[0];
        }
    } catch (const DomainError&) {
        r.setConstant(std::numeric_limits<double>::infinity());
    }
    return r;
}

}  // namespace

double PriceSeries::spacing() const {
    if (timestamps.size() < 2) return 1.0;
    return (timestamps.back() - timestamps.front()) / static_cast<double>(timestamps.size() - 1);
}

void PriceSeries::validate() const {
    if (prices.rows() == 0 || prices.cols() == 0) throw SchemaError("price series is empty");
    if (labels.size() != n_commodities()) throw SchemaError("label count does not match the price rows");
    if (timestamps.size() != n_observations()) throw SchemaError("timestamp count does not match the price columns");
    if (!(prices.array() > 0.0).all() || !prices.allFinite()) throw SchemaError("prices must be positive and finite");
    const double dt = spacing();
    for (std::size_t k = 1; k < timestamps.size(); ++k) {
        const int row = static_cast<int>(k) + 2;
        const double step = timestamps[k] - timestamps[k - 1];
        if (!(step > 0.0)) {
            throw SchemaError(row_text(row) + ": timestamps must be strictly increasing", row, "timestamp");
        }
        if (std::abs(step - dt) > 1e-9 * std::abs(dt)) {
            throw SchemaError(row_text(row) + ": gap or irregular spacing in timestamps", row, "timestamp");
        }
    }
}

PriceSeries read_price_csv(std::istream& in) {
    std::string line;
    int row = 0;
    do {
        if (!std::getline(in, line)) throw SchemaError("price CSV has no header", row + 1);
        ++row;
    } while (!line.empty() && line[0] == '#');
    const int header_row = row;
    const auto header = detail::split_csv(line);
    if (header.empty() || header[0] != "timestamp") {
        throw SchemaError(row_text(header_row) + ": first column must be 'timestamp'", header_row, "timestamp");
    }
    if (header.size() < 2) throw SchemaError(row_text(header_row) + ": no price columns", header_row);
    std::set<std::string> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].empty()) throw SchemaError(row_text(header_row) + ": empty column name at position " + std::to_string(c + 1), header_row);
        if (!seen.insert(header[c]).second) {
            throw SchemaError(row_text(header_row) + ": duplicate column '" + header[c] + "'", header_row, header[c]);
        }
    }
    PriceSeries series;
    series.labels.assign(header.begin() + 1, header.end());
    const std::size_t n = series.labels.size();
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++row;
        if (detail::blank(line)) continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() < header.size()) {
            const std::string& missing = header[cells.size()];
            throw SchemaError(row_text(row) + ": missing column '" + missing + "'", row, missing);
        }
        if (cells.size() > header.size()) {
            throw SchemaError(row_text(row) + ": more cells than header columns", row);
        }
        series.timestamps.push_back(parse_timestamp(cells[0], row));
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (cells[c].empty()) {
                throw SchemaError(row_text(row) + ": missing value in column '" + header[c] + "'", row, header[c]);
            }
            values.push_back(parse_price(cells[c], row, header[c]));
        }
    }
    const std::size_t T = series.timestamps.size();
    if (T == 0) throw SchemaError("price CSV has no data rows", header_row);
    series.prices.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            series.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = values[t * n + i];
        }
    }
    series.validate();
    return series;
}

PriceSeries load_price_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open price file '" + path.string() + "'", "series");
    return read_price_csv(in);
}

void write_price_csv(std::ostream& out, const PriceSeries& series) {
    out << "timestamp";
    for (const auto& label : series.labels) out << "," << label;
    out << "\n" << std::setprecision(17);
    for (std::size_t t = 0; t < series.n_observations(); ++t) {
        out << series.timestamps[t];
        for (std::size_t i = 0; i < series.n_commodities(); ++i) {
            out << "," << series.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
        }
        out << "\n";
    }
}

PriceSeries series_from_path(const ModelParams& params, const Matrix& y, double dt, std::vector<std::string> labels) {
    PriceSeries series;
    series.prices = PricePath(y).prices(params);
    series.timestamps.resize(static_cast<std::size_t>(y.cols()));
    for (std::size_t t = 0; t < series.timestamps.size(); ++t) series.timestamps[t] = static_cast<double>(t) * dt;
    if (labels.empty()) {
        for (Eigen::Index i = 0; i < y.rows(); ++i) labels.push_back("p" + std::to_string(i + 1));
    }
    series.labels = std::move(labels);
    return series;
}

Autocovariance empirical_autocovariance(const PriceSeries& series, std::size_t max_lag) {
    series.validate();
    if (series.n_observations() < 10 * std::max<std::size_t>(max_lag, 1)) {
        std::ostringstream os;
        os << "autocovariance to lag " << max_lag << " needs at least " << 10 * std::max<std::size_t>(max_lag, 1)
           << " observations, got " << series.n_observations();
        throw LengthError(os.str());
    }
    return autocovariance_of(log_deviations(series), max_lag, series.spacing());
}

std::size_t default_fit_lags(const Autocovariance& acov, std::size_t i, std::size_t min_lags) {
    const std::size_t last = acov.cov.lags.size() - 1;
    for (std::size_t k = 1; k <= last; ++k) {
        if (std::abs(acov.cov.at(i, i, k)) < 2.0 * acov.stderr_diag(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))) {
            return std::min(std::max(k, min_lags), last);
        }
    }
    return last;
}

ChannelFit fit_channel(const std::vector<double>& lags, const std::vector<double>& chat, double m,
                       const FitOptions& options) {
    if (!(m > 0.0)) throw DomainError("fit_channel needs m > 0");
    if (lags.size() != chat.size() || lags.size() < 4) {
        throw LengthError("fit_channel needs matching lag and value arrays with at least 4 entries");
    }
    if (!(chat[0] > 0.0) || !std::isfinite(chat[0])) {
        throw IdentifiabilityError("zero-lag autocovariance is not positive; the series carries no fluctuation");
    }
    const std::size_t count = options.fit_lags == 0 ? lags.size() : std::min(options.fit_lags + 1, lags.size());
    if (count < 4) throw LengthError("fit_channel needs at least 4 lags in the fit window");
    if (chat[count - 1] / chat[0] > 0.9) {
        throw IdentifiabilityError("autocovariance does not decay over the fit window; parameters are not identified");
    }

    const auto residual = [&](const Vector& theta) { return residuals_for(theta, lags, chat, count, m); };
    optimize::LeastSquaresOptions ls;
    ls.gradient_tol = options.gradient_tol;
    ls.max_iterations = options.max_iterations;

    std::vector<Vector> starts;
    if (options.initial.size() == 3) {
        if (!(options.initial.array() > 0.0).all()) throw DomainError("initial (kappa, mu, gamma) must be positive");
        starts.push_back(options.initial.array().log().matrix());
    } else {
        // exponential decay exp(-r tau) with amplitude 1/(2 m sqrt(mu gamma))
        const double dt = lags[1] - lags[0];
        const double rho = chat[1] / chat[0];
        const double r = (rho > 0.0 && rho < 1.0) ? -std::log(rho) / dt : 1.0 / dt;
        const double root = 1.0 / (2.0 * m * chat[0]);
        for (double scale : {1.0, 1.0 / 3.0, 3.0}) {
            const double mu = root / (scale * r);
            const double gamma = root * scale * r;
            for (double f : {1e-4, 1e-2, 0.1, 0.25, 1.0, 4.0}) {
                Vector theta(3);
                theta << std::log(f * mu * mu / gamma), std::log(mu), std::log(gamma);
                starts.push_back(theta);
            }
        }
    }

    std::optional<optimize::LeastSquaresResult> best;
    std::vector<double> best_trace;
    for (const auto& start : starts) {
        if (!residual(start).allFinite()) continue;
        const auto run = optimize::levenberg_marquardt(residual, start, ls);
        if (!best || (run.converged && !best->converged) ||
            (run.converged == best->converged && run.objective < best->objective)) {
            best = run;
        }
    }
    if (!best) throw FitError("no start point gives finite residuals", {});
    if (!best->converged) throw FitError("channel fit did not converge", best->objective_trace);

    ChannelFit fit;
    fit.kappa = std::exp(best->theta(0));
    fit.mu = std::exp(best->theta(1));
    fit.gamma = std::exp(best->theta(2));
    fit.residual_norm = std::sqrt(2.0 * best->objective);
    fit.gradient_norm = best->gradient_norm;
    fit.fit_lags = count - 1;
    fit.objective_trace = best->objective_trace;
    fit.branch = residue_branch(fit.kappa, fit.mu, fit.gamma);
    return fit;
}

SupplyDemand recover_supply_demand(const PriceVector& p0_hat, const Vector& gamma_hat, const Vector& a,
                                   const Vector& b) {
    const auto n = static_cast<Eigen::Index>(p0_hat.size());
    if (gamma_hat.size() != n || a.size() != n || b.size() != n) {
        throw InconsistentInputs("p0, gamma, a and b must have the same length");
    }
    if (!(gamma_hat.array() > 0.0).all() || !(a.array() > 0.0).all() || !(b.array() > 0.0).all()) {
        throw InconsistentInputs("gamma, a and b must be positive");
    }
    const Vector& p0 = p0_hat.values();
    // at the minimum a d p0^{-a} = b s p0^{b} = K, and gamma = K (a + b) / 2
    const Vector k = (2.0 * gamma_hat.array() / (a.array() + b.array())).matrix();
    SupplyDemand out;
    out.d = (k.array() * p0.array().pow(a.array()) / a.array()).matrix();
    out.s = (k.array() * p0.array().pow(-b.array()) / b.array()).matrix();
    if (!(out.d.array() > 0.0).all() || !(out.s.array() > 0.0).all() || !out.d.allFinite() || !out.s.allFinite()) {
        throw InconsistentInputs("recovered demand or supply coefficients are not positive and finite");
    }
    return out;
}

CostParams recover_cost(const PriceVector& p0, const QuantityVector& q0, const Vector& b, const Vector& s, double m) {
    const auto n = static_cast<Eigen::Index>(p0.size());
    if (static_cast<Eigen::Index>(q0.size()) != n || b.size() != n || s.size() != n) {
        throw InconsistentInputs("p0, q0, b and s must have the same length");
    }
    if (!(m > 0.0)) throw InconsistentInputs("m must be positive");
    CostParams cost;
    cost.b = b;
    cost.beta = (p0.values().array() * q0.values().array().pow(-b.array().inverse())).matrix();
    cost.alpha = (m * s.array() * cost.beta.array().pow(b.array())).matrix();
    try {
        cost.validate();
    } catch (const ValidationError& e) {
        throw InconsistentInputs(e.what());
    }
    return cost;
}

CalibrationResult calibrate(const PriceSeries& series, double m, const Vector& a, const Vector& b,
                            const CalibrationOptions& options) {
    series.validate();
    const std::size_t N = series.n_commodities();
    const std::size_t T = series.n_observations();
    if (static_cast<std::size_t>(a.size()) != N || static_cast<std::size_t>(b.size()) != N) {
        throw InconsistentInputs("a and b need one entry per price column");
    }
    const std::size_t max_lag = options.max_lag == 0 ? std::min<std::size_t>(200, T / 10) : options.max_lag;

    CalibrationResult result;
    result.m = m;
    result.labels = series.labels;
    result.autocov = empirical_autocovariance(series, max_lag);
    const auto& acov = result.autocov;
    const auto n = static_cast<Eigen::Index>(N);
    result.kappa.resize(n);
    result.mu.resize(n);
    result.gamma.resize(n);

    std::vector<ChannelFit> fits(N);
    parallel_for(N, [&](std::size_t i) {
        std::vector<double> chat(acov.cov.lags.size());
        for (std::size_t k = 0; k < chat.size(); ++k) chat[k] = acov.cov.at(i, i, k);
        FitOptions fo = options.fit;
        if (fo.fit_lags == 0) fo.fit_lags = default_fit_lags(acov, i);
        fits[i] = fit_channel(acov.cov.lags, chat, m, fo);
    });
    result.fits = fits;
    double residual_sq = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        result.kappa(ii) = fits[i].kappa;
        result.mu(ii) = fits[i].mu;
        result.gamma(ii) = fits[i].gamma;
        residual_sq += fits[i].residual_norm * fits[i].residual_norm;
    }
    result.residual_norm = std::sqrt(residual_sq);
    result.p0_hat = series.prices.array().log().rowwise().mean().exp().matrix();
    const auto sd = recover_supply_demand(PriceVector(result.p0_hat), result.gamma, a, b);
    result.d_hat = sd.d;
    result.s_hat = sd.s;

    // moving-block bootstrap of the log-price deviations
    const Matrix x = log_deviations(series);
    result.covariance.assign(N, Matrix::Constant(3, 3, std::numeric_limits<double>::quiet_NaN()));
    if (options.n_bootstrap >= 2) {
        std::mt19937_64 rng(options.seed);
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t lags_used = fits[i].fit_lags;
            const std::size_t block = options.block_length > 0
                                          ? options.block_length
                                          : std::min<std::size_t>(std::max<std::size_t>(20 * lags_used, 50), T / 4);
            std::uniform_int_distribution<std::size_t> pick(0, T - block);
            std::vector<Vector> samples;
            for (std::size_t rep = 0; rep < options.n_bootstrap; ++rep) {
                Matrix resampled(1, static_cast<Eigen::Index>(T));
                std::size_t filled = 0;
                while (filled < T) {
                    const std::size_t start = pick(rng);
                    const std::size_t len = std::min(block, T - filled);
                    resampled.block(0, static_cast<Eigen::Index>(filled), 1, static_cast<Eigen::Index>(len)) =
                        x.block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(start), 1,
                                static_cast<Eigen::Index>(len));
                    filled += len;
                }
                resampled.array() -= resampled.mean();
                const auto boot = autocovariance_of(resampled, lags_used, series.spacing());
                std::vector<double> chat(lags_used + 1);
                for (std::size_t k = 0; k <= lags_used; ++k) chat[k] = boot.cov.at(0, 0, k);
                FitOptions fo = options.fit;
                fo.fit_lags = lags_used;
                fo.initial = Vector(3);
                fo.initial << fits[i].kappa, fits[i].mu, fits[i].gamma;
                try {
                    const auto f = fit_channel(boot.cov.lags, chat, m, fo);
                    Vector v(3);
                    v << f.kappa, f.mu, f.gamma;
                    samples.push_back(v);
                } catch (const Error&) {
                }
            }
            if (samples.size() >= 2) {
                Vector mean = Vector::Zero(3);
                for (const auto& v : samples) mean += v;
                mean /= static_cast<double>(samples.size());
                Matrix cov = Matrix::Zero(3, 3);
                for (const auto& v : samples) cov += (v - mean) * (v - mean).transpose();
                result.covariance[i] = cov / static_cast<double>(samples.size() - 1);
            }
        }
    }
    return result;
}

nlohmann::json calibration_to_json(const CalibrationResult& result) {
    const auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json channels = nlohmann::json::array();
    for (std::size_t i = 0; i < result.fits.size(); ++i) {
        const auto& f = result.fits[i];
        nlohmann::json cov = nlohmann::json::array();
        for (Eigen::Index r = 0; r < 3; ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < 3; ++c) {
                const double v = result.covariance[i](r, c);
                row.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
            }
            cov.push_back(row);
        }
        const char* branch = f.branch == ResidueBranch::real_roots      ? "real"
                             : f.branch == ResidueBranch::complex_roots ? "complex"
                                                                        : "double";
        channels.push_back({{"label", result.labels[i]},
                            {"kappa", f.kappa},
                            {"mu", f.mu},
                            {"gamma", f.gamma},
                            {"m_kappa", result.m * f.kappa},
                            {"m_mu", result.m * f.mu},
                            {"m_gamma", result.m * f.gamma},
                            {"branch", branch},
                            {"fit_lags", f.fit_lags},
                            {"residual_norm", f.residual_norm},
                            {"gradient_norm", f.gradient_norm},
                            {"covariance_kappa_mu_gamma", cov}});
    }
    return {{"m", result.m},
            {"channels", channels},
            {"p0_hat", vec(result.p0_hat)},
            {"d_hat", vec(result.d_hat)},
            {"s_hat", vec(result.s_hat)},
            {"residual_norm", result.residual_norm},
            {"n_obs", result.autocov.n_obs}};
}

void write_fit_overlay_csv(std::ostream& out, const CalibrationResult& result) {
    out << "channel,tau,empirical,stderr,fitted\n" << std::setprecision(17);
    for (std::size_t i = 0; i < result.fits.size(); ++i) {
        const auto& f = result.fits[i];
        for (std::size_t k = 0; k <= f.fit_lags; ++k) {
            const double tau = result.autocov.cov.lags[k];
            out << result.labels[i] << "," << tau << "," << result.autocov.cov.at(i, i, k) << ","
                << result.autocov.stderr_diag(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) << ","
                << channel_propagator(f.kappa, f.mu, f.gamma, result.m, tau) << "\n";
        }
    }
}

}  // namespace statmicro
