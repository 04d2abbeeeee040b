// Command-line front end: solve | propagate | sample | calibrate.

#include "statmicro/calibration.hpp"
#include "statmicro/duality.hpp"
#include "statmicro/errors.hpp"
#include "statmicro/lattice.hpp"
#include "statmicro/model.hpp"
#include "statmicro/params_io.hpp"
#include "statmicro/propagator.hpp"
#include "statmicro/sampler.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace statmicro;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct Flags {
    std::string config;
    std::string params;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> m;
    // lattice
    std::optional<std::size_t> n_steps;
    std::optional<double> dt;
    std::optional<std::string> boundary;
    // solve
    std::string format = "json";
    // propagate / sample
    std::optional<std::size_t> max_lag;
    // sample
    bool quadratic = false;
    std::optional<std::size_t> sweeps;
    std::optional<std::size_t> burnin;
    std::optional<std::size_t> thin;
    std::optional<std::size_t> chains;
    std::optional<double> step_size;
    std::string series_out;
    // calibrate
    std::string series;
    std::optional<std::size_t> fit_lags;
    std::optional<std::size_t> bootstrap;
};

// Effective settings after merging defaults, config file and flags.
struct Settings {
    fs::path params_path;
    fs::path out_dir = ".";
    std::uint64_t seed = 1;
    std::optional<double> m_override;
    Lattice lattice;
    SamplerConfig sampler;
    std::size_t propagate_max_lag = 20;
    std::optional<Vector> cost_beta;
    fs::path series_path;
    CalibrationOptions calibrate;
    std::optional<Vector> calibrate_a;
    std::optional<Vector> calibrate_b;
    std::optional<Vector> calibrate_q0;
};

const std::map<std::string, std::set<std::string>> kConfigKeys = {
    {"", {"params", "out", "seed", "m"}},
    {"lattice", {"n_steps", "dt", "boundary"}},
    {"sampler", {"n_sweeps", "n_burnin", "n_thin", "step_size", "seed", "n_chains", "mode", "max_lag", "tune"}},
    {"propagate", {"max_lag"}},
    {"calibrate", {"series", "max_lag", "fit_lags", "n_bootstrap", "block_length", "a", "b", "q0"}},
    {"cost", {"beta"}},
};

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[noreturn]] void config_error(const Document& doc, const std::string& key, const std::string& message) {
    throw ValidationError(doc.locate(key, message), key, doc.line_of(key));
}

void check_config_keys(const Document& doc) {
    for (const auto& [key, value] : doc.data.items()) {
        if (value.is_object()) {
            const auto section = kConfigKeys.find(key);
            if (section == kConfigKeys.end() || key.empty()) config_error(doc, key, "unknown config section [" + key + "]");
            for (const auto& [sub, unused] : value.items()) {
                (void)unused;
                if (!section->second.count(sub)) config_error(doc, key + "." + sub, "unknown config key '" + key + "." + sub + "'");
            }
        } else if (!kConfigKeys.at("").count(key)) {
            config_error(doc, key, "unknown config key '" + key + "'");
        }
    }
}

const json* find(const Document& doc, const std::string& section, const std::string& key) {
    const json* node = &doc.data;
    if (!section.empty()) {
        if (!node->contains(section)) return nullptr;
        node = &(*node)[section];
    }
    if (!node->contains(key)) return nullptr;
    return &(*node)[key];
}

std::string dotted(const std::string& section, const std::string& key) { return section.empty() ? key : section + "." + key; }

template <class T>
void read_count(const Document& doc, const std::string& section, const std::string& key, T& target) {
    if (const json* v = find(doc, section, key)) {
        if (!v->is_number_integer() || v->get<long long>() < 0) {
            config_error(doc, dotted(section, key), "'" + dotted(section, key) + "' must be a non-negative integer");
        }
        target = static_cast<T>(v->get<long long>());
    }
}

void read_number(const Document& doc, const std::string& section, const std::string& key, double& target) {
    if (const json* v = find(doc, section, key)) {
        if (!v->is_number()) config_error(doc, dotted(section, key), "'" + dotted(section, key) + "' must be a number");
        target = v->get<double>();
    }
}

void read_string(const Document& doc, const std::string& section, const std::string& key, std::string& target) {
    if (const json* v = find(doc, section, key)) {
        if (!v->is_string()) config_error(doc, dotted(section, key), "'" + dotted(section, key) + "' must be a string");
        target = v->get<std::string>();
    }
}

std::optional<Vector> read_vector(const Document& doc, const std::string& section, const std::string& key) {
    const json* v = find(doc, section, key);
    if (!v) return std::nullopt;
    const auto fail = [&] { config_error(doc, dotted(section, key), "'" + dotted(section, key) + "' must be an array of numbers"); };
    if (v->is_number()) return Vector::Constant(1, v->get<double>());
    if (!v->is_array() || v->empty()) fail();
    Vector out(static_cast<Eigen::Index>(v->size()));
    for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) fail();
        out(static_cast<Eigen::Index>(i)) = (*v)[i].get<double>();
    }
    return out;
}

Settings build_settings(const Flags& flags) {
    Settings s;
    s.sampler.n_sweeps = 20000;
    s.sampler.n_burnin = 2000;
    std::string params;
    std::string out;
    std::string boundary = "periodic";
    std::string mode = "full";
    std::string series;
    fs::path base = ".";

    if (!flags.config.empty()) {
        const fs::path config_path = flags.config;
        if (!fs::exists(config_path)) throw ValidationError("config file '" + flags.config + "' does not exist", "config");
        const Document doc = load_document(config_path);
        check_config_keys(doc);
        base = config_path.parent_path();
        read_string(doc, "", "params", params);
        read_string(doc, "", "out", out);
        std::size_t seed = s.seed;
        read_count(doc, "", "seed", seed);
        s.seed = seed;
        if (find(doc, "", "m")) {
            double m = 0.0;
            read_number(doc, "", "m", m);
            s.m_override = m;
        }
        read_count(doc, "lattice", "n_steps", s.lattice.n_steps);
        read_number(doc, "lattice", "dt", s.lattice.dt);
        read_string(doc, "lattice", "boundary", boundary);
        read_count(doc, "sampler", "n_sweeps", s.sampler.n_sweeps);
        read_count(doc, "sampler", "n_burnin", s.sampler.n_burnin);
        read_count(doc, "sampler", "n_thin", s.sampler.n_thin);
        read_number(doc, "sampler", "step_size", s.sampler.step_size);
        if (find(doc, "sampler", "seed")) {
            read_count(doc, "sampler", "seed", seed);
            s.seed = seed;
        }
        read_count(doc, "sampler", "n_chains", s.sampler.n_chains);
        read_string(doc, "sampler", "mode", mode);
        read_count(doc, "sampler", "max_lag", s.sampler.max_lag);
        if (const json* v = find(doc, "sampler", "tune")) {
            if (!v->is_boolean()) config_error(doc, "sampler.tune", "'sampler.tune' must be true or false");
            s.sampler.tune = v->get<bool>();
        }
        read_count(doc, "propagate", "max_lag", s.propagate_max_lag);
        read_string(doc, "calibrate", "series", series);
        read_count(doc, "calibrate", "max_lag", s.calibrate.max_lag);
        read_count(doc, "calibrate", "fit_lags", s.calibrate.fit.fit_lags);
        read_count(doc, "calibrate", "n_bootstrap", s.calibrate.n_bootstrap);
        read_count(doc, "calibrate", "block_length", s.calibrate.block_length);
        s.calibrate_a = read_vector(doc, "calibrate", "a");
        s.calibrate_b = read_vector(doc, "calibrate", "b");
        s.calibrate_q0 = read_vector(doc, "calibrate", "q0");
        s.cost_beta = read_vector(doc, "cost", "beta");
        try {
            parse_boundary(boundary);
            parse_action_mode(mode);
        } catch (const ValidationError& e) {
            const std::string key = e.field() == "mode" ? "sampler.mode" : "lattice.boundary";
            config_error(doc, key, e.what());
        }
    }

    // flags override the config file
    const auto relative = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    s.params_path = !flags.params.empty() ? fs::path(flags.params) : (params.empty() ? fs::path() : relative(params));
    s.out_dir = !flags.out.empty() ? fs::path(flags.out) : (out.empty() ? fs::path(".") : relative(out));
    s.series_path = !flags.series.empty() ? fs::path(flags.series) : (series.empty() ? fs::path() : relative(series));
    if (flags.seed) s.seed = *flags.seed;
    if (flags.m) s.m_override = *flags.m;
    if (flags.n_steps) s.lattice.n_steps = *flags.n_steps;
    if (flags.dt) s.lattice.dt = *flags.dt;
    if (flags.boundary) boundary = *flags.boundary;
    if (flags.max_lag) {
        s.propagate_max_lag = *flags.max_lag;
        s.sampler.max_lag = *flags.max_lag;
        s.calibrate.max_lag = *flags.max_lag;
    }
    if (flags.quadratic) mode = "quadratic";
    if (flags.sweeps) s.sampler.n_sweeps = *flags.sweeps;
    if (flags.burnin) s.sampler.n_burnin = *flags.burnin;
    if (flags.thin) s.sampler.n_thin = *flags.thin;
    if (flags.chains) s.sampler.n_chains = *flags.chains;
    if (flags.step_size) s.sampler.step_size = *flags.step_size;
    if (flags.fit_lags) s.calibrate.fit.fit_lags = *flags.fit_lags;
    if (flags.bootstrap) s.calibrate.n_bootstrap = *flags.bootstrap;

    s.lattice.boundary = parse_boundary(boundary);
    s.sampler.mode = parse_action_mode(mode);
    s.sampler.seed = s.seed;
    s.calibrate.seed = s.seed;
    s.lattice.validate();
    if (s.m_override && !(*s.m_override > 0.0)) throw ValidationError("m must be > 0", "m");
    return s;
}

ModelParams load_model(const Settings& s) {
    if (s.params_path.empty()) throw ValidationError("no params file given (use --params or 'params' in the config)", "params");
    if (!fs::exists(s.params_path)) {
        throw ValidationError("params file '" + s.params_path.string() + "' does not exist", "params");
    }
    ModelParams params = load_params(s.params_path);
    if (s.m_override) {
        params.m = *s.m_override;
        params.validate();
    }
    return params;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

json lattice_json(const Lattice& lattice) {
    return {{"n_steps", lattice.n_steps}, {"dt", lattice.dt}, {"boundary", to_string(lattice.boundary)}};
}

struct Output {
    fs::path dir;
    std::string hash;
    std::uint64_t seed = 0;

    json stamp(json body) const {
        body["config_hash"] = hash;
        body["seed"] = seed;
        return body;
    }

    void write_json(const std::string& name, const json& body) const {
        std::ofstream out(dir / name);
        out << stamp(body).dump(2) << "\n";
        if (!out) throw Error("cannot write " + (dir / name).string());
    }

    std::ofstream open_csv(const std::string& name) const {
        std::ofstream out(dir / name);
        if (!out) throw Error("cannot write " + (dir / name).string());
        out << "# config_hash=" << hash << " seed=" << seed << "\n";
        return out;
    }
};

Output prepare_output(const Settings& s, const json& effective) {
    std::error_code ec;
    fs::create_directories(s.out_dir, ec);
    if (!fs::is_directory(s.out_dir)) throw ValidationError("output directory '" + s.out_dir.string() + "' is not writable", "out");
    return Output{s.out_dir, hex64(fnv1a(effective.dump())), s.seed};
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

int cmd_solve(const Settings& s, const std::string& format) {
    if (format != "json" && format != "csv") throw ValidationError("--format must be json or csv", "format");
    const ModelParams params = load_model(s);
    const Vector p0 = stationary_prices(params).values();
    const Vector pstar = classical_market_prices(params).values();
    const Vector gamma = gamma_coefficients(params);
    const double v0 = potential_minimum(params);

    json clearing = nullptr;
    std::optional<MarketClearing> mc;
    if (params.uniform_demand_exponent()) {
        const Vector beta = s.cost_beta ? *s.cost_beta : Vector::Ones(static_cast<Eigen::Index>(params.n_commodities));
        if (static_cast<std::size_t>(beta.size()) != params.n_commodities) {
            throw ValidationError("cost.beta needs one entry per commodity", "cost.beta");
        }
        mc = market_clearing(params, CostParams::linked(params, beta));
        clearing = {{"beta", to_std(beta)},
                    {"q_star", to_std(mc->q_star.values())},
                    {"p_star", to_std(mc->p_star.values())},
                    {"expenditure", mc->expenditure},
                    {"residual", mc->residual},
                    {"iterations", mc->iterations}};
    }

    const json effective = {{"command", "solve"}, {"params", params_to_json(params)}, {"cost_beta", s.cost_beta ? json(to_std(*s.cost_beta)) : json(nullptr)}};
    const Output out = prepare_output(s, effective);
    if (format == "json") {
        out.write_json("solve.json", {{"params", params_to_json(params)},
                                      {"p0", to_std(p0)},
                                      {"p_star", to_std(pstar)},
                                      {"gamma", to_std(gamma)},
                                      {"V0", v0},
                                      {"market_clearing", clearing}});
    } else {
        auto csv = out.open_csv("solve.csv");
        csv << "commodity,p0,p_star,gamma,clearing_q,clearing_p\n" << std::setprecision(17);
        for (std::size_t i = 0; i < params.n_commodities; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            csv << (i + 1) << "," << p0(ii) << "," << pstar(ii) << "," << gamma(ii) << ",";
            if (mc) {
                csv << mc->q_star[i] << "," << mc->p_star[i];
            } else {
                csv << ",";
            }
            csv << "\n";
        }
        csv << "V0,," << "," << "," << "," << v0 << "\n";
    }

    std::cout << "commodity        p0            p*            gamma\n";
    for (std::size_t i = 0; i < params.n_commodities; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        std::cout << std::left << std::setw(10) << (i + 1) << std::setw(14) << fmt(p0(ii)) << std::setw(14)
                  << fmt(pstar(ii)) << std::setw(14) << fmt(gamma(ii)) << "\n";
    }
    std::cout << "V0 = " << fmt(v0) << "\n";
    if (mc) std::cout << "market clearing expenditure = " << fmt(mc->expenditure) << "\n";
    return 0;
}

int cmd_propagate(const Settings& s) {
    const ModelParams params = load_model(s);
    const auto lags = lattice_lags(s.lattice, s.propagate_max_lag + 1);
    const auto lattice_table = matrix_propagator(params, s.lattice, lags);
    const auto continuum_table = continuum_propagator(params, lags);

    double max_abs = 0.0;
    double max_rel = 0.0;
    const double scale = lattice_table.at_lag(0).cwiseAbs().maxCoeff();
    for (std::size_t k = 0; k < lags.size(); ++k) {
        const double diff = (lattice_table.at_lag(k) - continuum_table.at_lag(k)).cwiseAbs().maxCoeff();
        max_abs = std::max(max_abs, diff);
        max_rel = std::max(max_rel, diff / scale);
    }
    const bool warn = max_rel > 0.01;

    const json effective = {{"command", "propagate"}, {"params", params_to_json(params)},
                            {"lattice", lattice_json(s.lattice)}, {"max_lag", s.propagate_max_lag}};
    const Output out = prepare_output(s, effective);
    {
        auto csv = out.open_csv("propagator_lattice.csv");
        write_propagator_csv(csv, lattice_table);
    }
    {
        auto csv = out.open_csv("propagator_continuum.csv");
        write_propagator_csv(csv, continuum_table);
    }
    out.write_json("propagate.json", {{"lattice", lattice_json(s.lattice)},
                                      {"lattice_table", propagator_to_json(lattice_table)},
                                      {"continuum_table", propagator_to_json(continuum_table)},
                                      {"max_abs_discrepancy", max_abs},
                                      {"max_rel_discrepancy", max_rel},
                                      {"discrepancy_warning", warn}});
    std::cout << "G_11(0) lattice = " << fmt(lattice_table.at(0, 0, 0)) << ", continuum = " << fmt(continuum_table.at(0, 0, 0))
              << "\nmax relative discrepancy = " << fmt(max_rel) << "\n";
    if (warn) std::cerr << "warning: lattice and continuum propagators differ by more than 1%\n";
    return 0;
}

int cmd_sample(const Settings& s, const std::string& series_out) {
    const ModelParams params = load_model(s);
    s.sampler.validate();
    const json effective = {{"command", "sample"}, {"params", params_to_json(params)},
                            {"lattice", lattice_json(s.lattice)}, {"sampler", sampler_config_to_json(s.sampler)}};
    const Output out = prepare_output(s, effective);

    const auto records = run_chains(params, s.lattice, s.sampler);
    const auto est = summarize(params, s.lattice, s.sampler, records);

    json comparison = nullptr;
    json zjson = nullptr;
    if (s.lattice.boundary == Boundary::periodic) {
        const auto ref = matrix_propagator(params, s.lattice, est.corr.lags);
        auto csv = out.open_csv("sample_compare.csv");
        csv << "tau,i,j,G_mc,G_err,G_gaussian,z\n" << std::setprecision(17);
        std::vector<double> z;
        for (std::size_t i = 0; i < est.corr.n; ++i) {
            for (std::size_t j = 0; j < est.corr.n; ++j) {
                for (std::size_t k = 0; k < est.corr.lags.size(); ++k) {
                    const double err = est.corr_err.at(i, j, k);
                    const double zk = err > 0.0 ? (est.corr.at(i, j, k) - ref.at(i, j, k)) / err : 0.0;
                    z.push_back(zk);
                    csv << est.corr.lags[k] << "," << (i + 1) << "," << (j + 1) << "," << est.corr.at(i, j, k) << ","
                        << err << "," << ref.at(i, j, k) << "," << zk << "\n";
                }
            }
        }
        std::size_t within1 = 0;
        std::size_t within2 = 0;
        std::size_t within3 = 0;
        double max_z = 0.0;
        for (double v : z) {
            within1 += std::abs(v) <= 1.0;
            within2 += std::abs(v) <= 2.0;
            within3 += std::abs(v) <= 3.0;
            max_z = std::max(max_z, std::abs(v));
        }
        const double n = static_cast<double>(z.size());
        zjson = {{"count", z.size()}, {"frac_within_1", within1 / n}, {"frac_within_2", within2 / n},
                 {"frac_within_3", within3 / n}, {"max_abs_z", max_z}};
        comparison = propagator_to_json(ref);
    }

    {
        auto csv = out.open_csv("sample.csv");
        write_estimate_csv(csv, est);
    }
    out.write_json("sample.json", {{"params", params_to_json(params)},
                                   {"lattice", lattice_json(s.lattice)},
                                   {"sampler", sampler_config_to_json(s.sampler)},
                                   {"estimate", estimate_to_json(est)},
                                   {"gaussian_reference", comparison},
                                   {"z_scores", zjson}});

    if (!series_out.empty()) {
        const auto series = series_from_path(params, records.front().final_path.y(), s.lattice.dt);
        std::ofstream f(series_out);
        if (!f) throw Error("cannot write " + series_out);
        f << "# config_hash=" << out.hash << " seed=" << out.seed << "\n";
        write_price_csv(f, series);
    }

    std::cout << "acceptance = " << fmt(est.acceptance_rate) << ", measurements = " << est.n_measurements << "\n";
    for (std::size_t i = 0; i < est.corr.n; ++i) {
        std::cout << "G_" << (i + 1) << (i + 1) << "(0) = " << fmt(est.corr.at(i, i, 0)) << " +- "
                  << fmt(est.corr_err.at(i, i, 0)) << "\n";
    }
    if (!zjson.is_null()) {
        std::cout << "|z| <= 1: " << fmt(zjson["frac_within_1"].get<double>()) << ", <= 2: "
                  << fmt(zjson["frac_within_2"].get<double>()) << ", <= 3: " << fmt(zjson["frac_within_3"].get<double>())
                  << ", max " << fmt(zjson["max_abs_z"].get<double>()) << "\n";
    }
    return 0;
}

int cmd_calibrate(const Settings& s) {
    if (s.series_path.empty()) throw ValidationError("no price series given (use --series or calibrate.series)", "series");
    const PriceSeries series = load_price_csv(s.series_path);
    const auto N = static_cast<Eigen::Index>(series.n_commodities());

    double m = 0.0;
    Vector a;
    Vector b;
    Vector supply_s;
    if (!s.params_path.empty()) {
        const ModelParams params = load_model(s);
        if (params.n_commodities != series.n_commodities()) {
            throw ValidationError("params describe " + std::to_string(params.n_commodities) + " commodities, series has " +
                                      std::to_string(series.n_commodities()),
                                  "params");
        }
        m = params.m;
        a = params.a;
        b = params.b;
    } else {
        if (!s.m_override) throw ValidationError("calibration needs m (params file, --m or top-level 'm')", "m");
        m = *s.m_override;
    }
    const auto broadcast = [&](const Vector& v, const char* name) {
        if (v.size() == 1) return Vector(Vector::Constant(N, v(0)));
        if (v.size() != N) throw ValidationError(std::string("calibrate.") + name + " needs one entry per series column", name);
        return v;
    };
    if (s.calibrate_a) a = broadcast(*s.calibrate_a, "a");
    if (s.calibrate_b) b = broadcast(*s.calibrate_b, "b");
    if (a.size() == 0 || b.size() == 0) throw ValidationError("calibration needs exponents a and b", "a");

    json effective = {{"command", "calibrate"},    {"m", m}, {"a", to_std(a)}, {"b", to_std(b)},
                      {"series", s.series_path.filename().string()},
                      {"max_lag", s.calibrate.max_lag}, {"fit_lags", s.calibrate.fit.fit_lags},
                      {"n_bootstrap", s.calibrate.n_bootstrap}, {"block_length", s.calibrate.block_length}};
    if (s.calibrate_q0) effective["q0"] = to_std(*s.calibrate_q0);
    const Output out = prepare_output(s, effective);

    const auto result = calibrate(series, m, a, b, s.calibrate);
    json body = calibration_to_json(result);
    if (s.calibrate_q0) {
        const auto cost = recover_cost(PriceVector(result.p0_hat), QuantityVector(broadcast(*s.calibrate_q0, "q0")), b,
                                       result.s_hat, m);
        body["cost"] = {{"beta", to_std(cost.beta)}, {"alpha", to_std(cost.alpha)}, {"b", to_std(cost.b)}};
    }
    out.write_json("calibration.json", body);
    {
        auto csv = out.open_csv("calibration_fit.csv");
        write_fit_overlay_csv(csv, result);
    }
    for (std::size_t i = 0; i < result.fits.size(); ++i) {
        const auto& f = result.fits[i];
        std::cout << result.labels[i] << ": m*kappa = " << fmt(m * f.kappa) << ", m*mu = " << fmt(m * f.mu)
                  << ", m*gamma = " << fmt(m * f.gamma) << ", d = " << fmt(result.d_hat(static_cast<Eigen::Index>(i)))
                  << ", s = " << fmt(result.s_hat(static_cast<Eigen::Index>(i))) << "\n";
    }
    return 0;
}

void append_log(const fs::path& dir, const std::vector<std::string>& argv, int code, const std::string& message) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return;
    std::ofstream log(dir / "run.log", std::ios::app);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << " exit=" << code << " cmd=";
    for (const auto& a : argv) log << " " << a;
    if (!message.empty()) log << " error=" << message;
    log << "\n";
}

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("-c,--config", f.config, "TOML or JSON run configuration");
    cmd->add_option("-p,--params", f.params, "model parameter file (TOML or JSON)");
    cmd->add_option("-o,--out", f.out, "output directory (default: current directory)");
    cmd->add_option("--seed", f.seed, "master RNG seed");
    cmd->add_option("--m", f.m, "override the budget m");
}

void add_lattice(CLI::App* cmd, Flags& f) {
    cmd->add_option("--n-steps", f.n_steps, "lattice slices T (default 128)");
    cmd->add_option("--dt", f.dt, "lattice spacing (default 0.1)");
    cmd->add_option("--boundary", f.boundary, "periodic | zero-fluctuation");
    cmd->add_option("--max-lag", f.max_lag, "largest lag in slices");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"statmicro: statistical microeconomics engine"};
    app.require_subcommand(1);
    Flags flags;

    auto* solve = app.add_subcommand("solve", "stationary prices, gamma, V0 and market clearing");
    add_common(solve, flags);
    solve->add_option("--format", flags.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));

    auto* propagate = app.add_subcommand("propagate", "continuum and lattice propagator tables");
    add_common(propagate, flags);
    add_lattice(propagate, flags);

    auto* sample = app.add_subcommand("sample", "Metropolis estimates of price correlators");
    add_common(sample, flags);
    add_lattice(sample, flags);
    sample->add_flag("--quadratic", flags.quadratic, "sample the Gaussian truncation of the action");
    sample->add_option("--sweeps", flags.sweeps, "total sweeps including burn-in");
    sample->add_option("--burnin", flags.burnin, "burn-in sweeps");
    sample->add_option("--thin", flags.thin, "sweeps between measurements");
    sample->add_option("--chains", flags.chains, "independent chains");
    sample->add_option("--step-size", flags.step_size, "initial proposal width in local-width units");
    sample->add_option("--series-out", flags.series_out, "write the final path of chain 1 as a price CSV");

    auto* calib = app.add_subcommand("calibrate", "fit channel parameters to a price series");
    add_common(calib, flags);
    calib->add_option("--series", flags.series, "price CSV: timestamp,label1,...");
    calib->add_option("--max-lag", flags.max_lag, "largest autocovariance lag in samples");
    calib->add_option("--fit-lags", flags.fit_lags, "lags used in the fit (default: automatic)");
    calib->add_option("--bootstrap", flags.bootstrap, "bootstrap replicates for the covariance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    const std::vector<std::string> args(argv, argv + argc);
    fs::path log_dir = flags.out.empty() ? fs::path(".") : fs::path(flags.out);
    try {
        const Settings settings = build_settings(flags);
        log_dir = settings.out_dir;
        int code = 0;
        if (solve->parsed()) code = cmd_solve(settings, flags.format);
        if (propagate->parsed()) code = cmd_propagate(settings);
        if (sample->parsed()) code = cmd_sample(settings, flags.series_out);
        if (calib->parsed()) code = cmd_calibrate(settings);
        append_log(log_dir, args, code, "");
        return code;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        append_log(log_dir, args, kExitValidation, e.what());
        return kExitValidation;
    } catch (const TuningError& e) {
        std::cerr << "error: " << e.what() << " (acceptance " << e.acceptance() << ", step size " << e.step_size() << ")\n";
        append_log(log_dir, args, kExitRuntime, e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        append_log(log_dir, args, kExitRuntime, e.what());
        return kExitRuntime;
    }
}
