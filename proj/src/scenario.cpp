#include "usq/scenario.hpp"

#include "usq/analysis.hpp"
#include "usq/error.hpp"
#include "usq/expression.hpp"
#include "usq/parallel.hpp"
#include "usq/toml.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

namespace usq {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------- config access

const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    if (!doc.contains(key)) {
        return empty;
    }
    const json& v = doc.at(key);
    if (!v.is_object()) {
        throw ConfigError(std::string("'") + key + "' must be a table");
    }
    return v;
}

bool is_auto(const json& v) { return v.is_string() && v.get<std::string>() == "auto"; }

double resolve(const json& v, const ExpressionContext& ctx, const std::string& what) {
    if (v.is_number()) {
        return v.get<double>();
    }
    if (v.is_string()) {
        if (is_auto(v)) {
            throw ConfigError(what + ": 'auto' is not allowed here");
        }
        return evaluate_expression(v.get<std::string>(), ctx);
    }
    throw ConfigError(what + ": expected a number or an expression string");
}

double field(const json& table, const char* key, double fallback, const ExpressionContext& ctx,
             const std::string& where) {
    if (!table.contains(key)) {
        return fallback;
    }
    return resolve(table.at(key), ctx, where + "." + key);
}

int int_field(const json& table, const char* key, int fallback, const std::string& where) {
    if (!table.contains(key)) {
        return fallback;
    }
    const json& v = table.at(key);
    if (!v.is_number_integer()) {
        throw ConfigError(where + "." + key + ": expected an integer");
    }
    return v.get<int>();
}

std::string string_field(const json& table, const char* key, const std::string& fallback, const std::string& where) {
    if (!table.contains(key)) {
        return fallback;
    }
    const json& v = table.at(key);
    if (!v.is_string()) {
        throw ConfigError(where + "." + key + ": expected a string");
    }
    return v.get<std::string>();
}

void check_keys(const json& table, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [k, v] : table.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError(where + ": unknown key '" + k + "'");
        }
    }
}

/// User symbols may reference built-ins, the spectrum and each other.
/// With strict off, symbols that cannot be resolved yet (they need the
/// spectrum) are left for a later pass.
void resolve_symbols(const json& doc, ExpressionContext& ctx, bool strict = true) {
    const json& table = section(doc, "symbols");
    std::vector<std::string> pending;
    for (const auto& [k, v] : table.items()) {
        pending.push_back(k);
    }
    while (!pending.empty()) {
        std::vector<std::string> next;
        std::string last_error;
        for (const auto& k : pending) {
            try {
                ctx.symbols[k] = resolve(table.at(k), ctx, "symbols." + k);
            } catch (const ConfigError& e) {
                next.push_back(k);
                last_error = e.what();
            }
        }
        if (next.size() == pending.size()) {
            if (!strict) {
                return;
            }
            throw ConfigError("symbols: cannot resolve (" + last_error + ")");
        }
        pending = std::move(next);
    }
}

class Logger {
public:
    explicit Logger(bool on) : on_(on), start_(std::chrono::steady_clock::now()) {}
    void operator()(const std::string& msg) const {
        if (on_) {
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
            std::clog << "[" << format_number(std::round(s * 10) / 10) << "s] " << msg << '\n';
        }
    }
    double elapsed() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    bool on_;
    std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------- operators

int atom_dim_of(const SpaceSpec& space) { return space.factors().at(1); }

QOperator named_operator(const std::string& name, int n_max, int atom_dim) {
    if (name == "a") {
        return embed_cavity(annihilation(n_max), atom_dim);
    }
    if (name == "x") {
        const auto a = annihilation(n_max);
        return embed_cavity(a + a.adjoint(), atom_dim);
    }
    if (atom_dim == 2) {
        const auto q = two_level_ops();
        if (name == "sigma_minus") return embed_atom(n_max, q.sigma_minus);
        if (name == "sigma_plus") return embed_atom(n_max, q.sigma_plus);
        if (name == "sigma_x") return embed_atom(n_max, q.sigma_x);
        if (name == "sigma_z") return embed_atom(n_max, q.sigma_z);
    } else if (atom_dim == 3) {
        const auto t = three_level_ops();
        const auto level = [&](char c) {
            switch (c) {
            case 's': return Level3::s;
            case 'g': return Level3::g;
            case 'e': return Level3::e;
            default: throw ConfigError("unknown level '" + std::string(1, c) + "' in operator '" + name + "'");
            }
        };
        // sigma_ab or sigma_ab+sigma_ba
        const auto single = [&](std::string_view n) {
            if (n.size() != 8 || !n.starts_with("sigma_")) {
                throw ConfigError("unknown operator '" + name + "'");
            }
            return t(level(n[6]), level(n[7]));
        };
        const auto plus = name.find('+');
        if (plus == std::string::npos) {
            return embed_atom(n_max, single(name));
        }
        return embed_atom(n_max, single(std::string_view(name).substr(0, plus)) +
                                     single(std::string_view(name).substr(plus + 1)));
    }
    throw ConfigError("unknown operator '" + name + "' for a " + std::to_string(atom_dim) + "-level emitter");
}

// ---------------------------------------------------------------- summaries

json spectrum_summary(const Spectrum& s, int count = 8) {
    json levels = json::array();
    for (int k = 0; k < std::min(count, s.size()); ++k) {
        levels.push_back({{"index", k}, {"energy", s.energies(k)}, {"relative", s.transition(k)}});
    }
    return {{"levels", levels}, {"degenerate_clusters", s.degenerate_clusters}, {"dimension", s.size()}};
}

double energy_delta(const QOperator& small, const QOperator& big, int levels = 6) {
    Eigen::SelfAdjointEigenSolver<Matrix> a(small.mat(), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> b(big.mat(), Eigen::EigenvaluesOnly);
    double d = 0.0;
    for (int k = 0; k < levels; ++k) {
        d = std::max(d, std::abs(a.eigenvalues()(k) - b.eigenvalues()(k)));
    }
    return d;
}

json trajectory_meta(const Trajectory& traj) {
    double trace = 0.0;
    double herm = 0.0;
    double min_eig = 1.0;
    for (const auto& d : traj.diagnostics) {
        trace = std::max(trace, d.trace_error);
        herm = std::max(herm, d.hermiticity_error);
        min_eig = std::min(min_eig, d.min_eigenvalue);
    }
    json rates = json::object();
    for (const auto& [label, rate] : traj.channel_rates) {
        rates[label] = rate;
    }
    return {{"step", traj.step},
            {"max_frequency_scale", traj.max_frequency_scale},
            {"points", traj.size()},
            {"warnings", traj.warnings},
            {"max_trace_error", trace},
            {"max_hermiticity_error", herm},
            {"min_eigenvalue", min_eig},
            {"channel_rates", rates}};
}

// ---------------------------------------------------------------- model pieces

RabiParams rabi_params(const json& model, const ExpressionContext& ctx, double omega_q_fallback) {
    check_keys(model, {"omega_c", "omega_q", "coupling", "theta"}, "model");
    RabiParams p;
    p.omega_c = field(model, "omega_c", 1.0, ctx, "model");
    p.coupling = field(model, "coupling", 0.0, ctx, "model");
    p.theta = field(model, "theta", 0.0, ctx, "model");
    p.omega_q = model.contains("omega_q") && !is_auto(model.at("omega_q")) ? field(model, "omega_q", 1.0, ctx, "model")
                                                                           : omega_q_fallback;
    return p;
}

CascadeParams cascade_params(const json& model, const ExpressionContext& ctx) {
    check_keys(model, {"omega_c", "omega_s", "omega_g", "omega_e", "coupling"}, "model");
    CascadeParams p;
    p.omega_c = field(model, "omega_c", p.omega_c, ctx, "model");
    p.omega_s = field(model, "omega_s", p.omega_s, ctx, "model");
    p.omega_g = field(model, "omega_g", p.omega_g, ctx, "model");
    p.omega_e = field(model, "omega_e", p.omega_e, ctx, "model");
    p.coupling = field(model, "coupling", p.coupling, ctx, "model");
    return p;
}

struct ChannelSpec {
    std::string label;
    std::string op;
    double rate = 0.0;
};

std::vector<ChannelSpec> channel_specs(const json& doc, const ExpressionContext& ctx) {
    const json& diss = section(doc, "dissipation");
    check_keys(diss, {"cutoff_window", "channels"}, "dissipation");
    std::vector<ChannelSpec> out;
    if (!diss.contains("channels")) {
        return out;
    }
    if (!diss.at("channels").is_array()) {
        throw ConfigError("dissipation.channels must be an array of tables");
    }
    for (const auto& ch : diss.at("channels")) {
        check_keys(ch, {"label", "operator", "rate"}, "dissipation.channels");
        ChannelSpec c{.label = string_field(ch, "label", "", "dissipation.channels"),
                      .op = string_field(ch, "operator", "", "dissipation.channels"),
                      .rate = field(ch, "rate", 0.0, ctx, "dissipation.channels")};
        if (c.op.empty()) {
            throw ConfigError("dissipation.channels: missing operator");
        }
        if (c.label.empty()) {
            c.label = c.op;
        }
        if (!(c.rate >= 0.0)) {
            throw ConfigError("dissipation.channels." + c.label + ": rate must be >= 0");
        }
        out.push_back(c);
    }
    return out;
}

std::vector<JumpSet> build_channels(const std::vector<ChannelSpec>& specs, const Spectrum& s, int n_max,
                                    double window) {
    const int cutoff = s.levels_within(window);
    std::vector<JumpSet> out;
    for (const auto& c : specs) {
        out.push_back(build_jumps(
            s, {.label = c.label, .op = named_operator(c.op, n_max, atom_dim_of(s.space)), .rate = c.rate}, cutoff));
    }
    return out;
}

double cutoff_window(const json& doc, const ExpressionContext& ctx) {
    return field(section(doc, "dissipation"), "cutoff_window", 6.0, ctx, "dissipation");
}

/// A configured pulse with its 'auto' fields still open.
struct PulsePlan {
    GaussianPulse pulse;
    bool auto_amplitude = false;
    bool auto_phase = false;
    std::optional<double> effective_area;
};

std::vector<PulsePlan> pulse_plans(const json& doc, ExpressionContext& ctx) {
    const json& drive = section(doc, "drive");
    check_keys(drive, {"operator", "pulses"}, "drive");
    std::vector<PulsePlan> out;
    if (!drive.contains("pulses")) {
        return out;
    }
    if (!drive.at("pulses").is_array()) {
        throw ConfigError("drive.pulses must be an array of tables");
    }
    int index = 0;
    for (const auto& p : drive.at("pulses")) {
        const std::string where = "drive.pulses[" + std::to_string(index) + "]";
        check_keys(p, {"amplitude", "effective_area", "center", "width", "carrier", "phase"}, where);
        for (const char* key : {"center", "width", "carrier"}) {
            if (!p.contains(key)) {
                throw ConfigError(where + ": missing '" + key + "'");
            }
        }
        PulsePlan plan;
        // Width first so that centres may be written in units of tau.
        plan.pulse.width = resolve(p.at("width"), ctx, where + ".width");
        const std::string suffix = index == 0 ? "" : std::to_string(index + 1);
        ctx.symbols["tau" + suffix] = plan.pulse.width;
        plan.pulse.carrier = resolve(p.at("carrier"), ctx, where + ".carrier");
        ctx.symbols["carrier" + suffix] = plan.pulse.carrier;
        plan.pulse.center = resolve(p.at("center"), ctx, where + ".center");
        ctx.symbols["t0" + suffix] = plan.pulse.center;
        plan.auto_amplitude = p.contains("amplitude") && is_auto(p.at("amplitude"));
        if (!plan.auto_amplitude) {
            plan.pulse.amplitude = field(p, "amplitude", 0.0, ctx, where);
        }
        plan.auto_phase = p.contains("phase") && is_auto(p.at("phase"));
        if (!plan.auto_phase) {
            plan.pulse.phase = field(p, "phase", 0.0, ctx, where);
        }
        if (p.contains("effective_area")) {
            plan.effective_area = resolve(p.at("effective_area"), ctx, where + ".effective_area");
        }
        if (!(plan.pulse.width > 0.0)) {
            throw ConfigError(where + ": width must be > 0");
        }
        out.push_back(plan);
        ++index;
    }
    return out;
}

std::vector<GaussianPulse> pulses_of(const std::vector<PulsePlan>& plans) {
    std::vector<GaussianPulse> out;
    for (const auto& p : plans) {
        out.push_back(p.pulse);
    }
    return out;
}

std::string drive_operator(const json& doc, const std::string& fallback) {
    return string_field(section(doc, "drive"), "operator", fallback, "drive");
}

std::vector<double> time_grid(const json& doc, const ExpressionContext& ctx, double default_end, double default_dt) {
    const json& t = section(doc, "time");
    check_keys(t, {"start", "end", "dt"}, "time");
    const double start = field(t, "start", 0.0, ctx, "time");
    const double end = field(t, "end", default_end, ctx, "time");
    const double dt = field(t, "dt", default_dt, ctx, "time");
    if (!(end > start) || !(dt > 0.0)) {
        throw ConfigError("time: need end > start and dt > 0");
    }
    return uniform_grid(start, end, dt);
}

EvolveOptions solver_options(const json& doc, const ExpressionContext& ctx, bool log) {
    const json& s = section(doc, "solver");
    check_keys(s, {"step", "drive_floor"}, "solver");
    EvolveOptions o;
    o.step = field(s, "step", o.step, ctx, "solver");
    o.drive_floor = field(s, "drive_floor", o.drive_floor, ctx, "solver");
    o.keep_states = false;
    o.log_warnings = log;
    return o;
}

struct FramePlan {
    std::string label;
    double omega = 1.0;
    std::optional<double> phi; ///< empty: align to the strongest squeezing
};

std::vector<FramePlan> frame_plans(const json& doc, const ExpressionContext& ctx, std::vector<FramePlan> fallback) {
    if (!doc.contains("frames")) {
        return fallback;
    }
    if (!doc.at("frames").is_array() || doc.at("frames").empty()) {
        throw ConfigError("frames must be a non-empty array of tables");
    }
    std::vector<FramePlan> out;
    std::set<std::string> labels;
    for (const auto& f : doc.at("frames")) {
        check_keys(f, {"label", "omega", "phi"}, "frames");
        FramePlan plan;
        plan.label = string_field(f, "label", "frame" + std::to_string(out.size()), "frames");
        plan.omega = field(f, "omega", 1.0, ctx, "frames." + plan.label);
        if (!(f.contains("phi") && is_auto(f.at("phi")))) {
            plan.phi = field(f, "phi", 0.0, ctx, "frames." + plan.label);
        }
        if (!labels.insert(plan.label).second) {
            throw ConfigError("frames: duplicate label '" + plan.label + "'");
        }
        out.push_back(plan);
    }
    return out;
}

// ---------------------------------------------------------------- simulation

struct Simulation {
    const Spectrum* spectrum = nullptr;
    std::optional<DressedDecomposition> field;
    std::optional<DressedDecomposition> emitter; ///< positive part of the emitter operator reported as pop_q
    std::optional<DriveSpec> drive;
    std::vector<JumpSet> jumps;
    Matrix rho0_dressed;
    std::vector<double> times;
    EvolveOptions opts;
};

struct MomentSeries {
    std::vector<double> t;
    std::vector<FieldMoments> gen;
    std::vector<FieldMoments> std_;
    std::vector<double> pop;
    Trajectory traj;
};

MomentSeries simulate(const Simulation& sim) {
    const Spectrum& s = *sim.spectrum;
    const FieldProbe gen(s.states, *sim.field, VarianceMode::generalized);
    const FieldProbe std_(s.states, *sim.field, VarianceMode::standard);
    const FieldProbe emitter(s.states, *sim.emitter, VarianceMode::generalized);
    MomentSeries out;
    out.t.reserve(sim.times.size());
    out.gen.reserve(sim.times.size());
    out.std_.reserve(sim.times.size());
    out.pop.reserve(sim.times.size());
    const DensityMatrix rho0(s.space, s.to_bare(sim.rho0_dressed));
    out.traj = evolve(rho0, s, sim.drive, sim.jumps, sim.times, sim.opts,
                      [&](std::size_t, double t, const Matrix& rho) {
                          out.t.push_back(t);
                          out.gen.push_back(gen.moments(rho));
                          out.std_.push_back(std_.moments(rho));
                          out.pop.push_back(emitter.moments(rho).minus_plus.real());
                      });
    return out;
}

/// Phase that makes S1 most negative where |<x+,x+>| peaks in the given frame.
double aligned_phase(const MomentSeries& m, double omega) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < m.gen.size(); ++i) {
        const double a = std::abs(m.gen[i].plus_plus - m.gen[i].plus * m.gen[i].plus);
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    const cplx c = m.gen[best].plus_plus - m.gen[best].plus * m.gen[best].plus;
    // S1 ~ 2 Re(c e^{2i Gamma}) is minimal when 2 Gamma = pi - arg c.
    double phi = 0.5 * (kPi - std::arg(c)) - omega * m.t[best];
    phi = std::fmod(phi, kPi);
    return phi < 0.0 ? phi + kPi : phi;
}

SeriesTable make_table(const MomentSeries& m, const std::string& label, const ReferenceFrame& frame) {
    SeriesTable table{.label = label, .frame = frame, .rows = {}};
    const ReferenceFrame rotated{.omega = frame.omega, .phi = frame.phi + 0.5 * kPi};
    table.rows.reserve(m.t.size());
    for (std::size_t i = 0; i < m.t.size(); ++i) {
        const double t = m.t[i];
        table.rows.push_back(SeriesRow{.t = t,
                                       .s1n_gen = m.gen[i].variance(frame.angle(t)),
                                       .s2n_gen = m.gen[i].variance(rotated.angle(t)),
                                       .s1n_std = m.std_[i].variance(frame.angle(t)),
                                       .s2n_std = m.std_[i].variance(rotated.angle(t)),
                                       .flux = m.gen[i].flux(),
                                       .pop_q = m.pop[i]});
    }
    return table;
}

std::vector<SeriesTable> make_tables(const MomentSeries& m, const std::vector<FramePlan>& frames, json& meta) {
    std::vector<SeriesTable> out;
    json fm = json::array();
    for (const auto& f : frames) {
        const double phi = f.phi ? *f.phi : aligned_phase(m, f.omega);
        out.push_back(make_table(m, f.label, {.omega = f.omega, .phi = phi}));
        fm.push_back({{"label", f.label}, {"omega", f.omega}, {"phi", phi}, {"phi_aligned", !f.phi.has_value()}});
    }
    meta["frames"] = fm;
    return out;
}

json field_meta(const DressedDecomposition& d) {
    return {{"x_diag_norm", d.diag_norm}, {"x_diag_present", d.has_diagonal()}, {"x0", d.x0}};
}

std::vector<double> column(const SeriesTable& t, std::optional<double> SeriesRow::*member, double from, double to) {
    std::vector<double> v;
    for (const auto& r : t.rows) {
        if (r.t >= from && r.t <= to && (r.*member)) {
            v.push_back(*(r.*member));
        }
    }
    return v;
}

std::vector<double> times_in(const SeriesTable& t, double from, double to) {
    std::vector<double> v;
    for (const auto& r : t.rows) {
        if (r.t >= from && r.t <= to) {
            v.push_back(r.t);
        }
    }
    return v;
}

double min_of(const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : *std::min_element(v.begin(), v.end());
}

double max_abs_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

/// Largest |S1|, |S2| difference (generalized, first frame) at the probe times.
double series_delta(const MomentSeries& a, const MomentSeries& b, const ReferenceFrame& frame,
                    const std::vector<double>& probes) {
    const ReferenceFrame rotated{.omega = frame.omega, .phi = frame.phi + 0.5 * kPi};
    double d = 0.0;
    for (double tp : probes) {
        const auto nearest = [&](const MomentSeries& m) {
            const auto it = std::lower_bound(m.t.begin(), m.t.end(), tp);
            return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - m.t.begin(), m.t.size() - 1));
        };
        const auto ia = nearest(a);
        const auto ib = nearest(b);
        const double t = a.t[ia];
        d = std::max(d, std::abs(a.gen[ia].variance(frame.angle(t)) - b.gen[ib].variance(frame.angle(t))));
        d = std::max(d, std::abs(a.gen[ia].variance(rotated.angle(t)) - b.gen[ib].variance(rotated.angle(t))));
    }
    return d;
}

/// Root of f(x) = target on [lo, hi] with f(lo) and f(hi) on opposite sides
/// (Illinois variant of regula falsi).
template <class F>
double solve_bracketed(F&& f, double lo, double hi, double target, double tol) {
    double flo = f(lo) - target;
    double fhi = f(hi) - target;
    if (flo * fhi > 0.0) {
        throw NumericalError("calibration: target not bracketed");
    }
    int side = 0;
    for (int it = 0; it < 100; ++it) {
        const double x = (lo * fhi - hi * flo) / (fhi - flo);
        const double fx = f(x) - target;
        if (std::abs(fx) < tol || std::abs(hi - lo) < 1e-12 * std::abs(hi)) {
            return x;
        }
        if (fx * fhi > 0.0) {
            hi = x;
            fhi = fx;
            if (side == -1) {
                flo *= 0.5;
            }
            side = -1;
        } else {
            lo = x;
            flo = fx;
            if (side == 1) {
                fhi *= 0.5;
            }
            side = 1;
        }
    }
    throw NumericalError("calibration: no convergence");
}

/// Expand [0, guess] until f crosses target, then solve. f(0) is on the far side.
template <class F>
double calibrate(F&& f, double guess, double target, double tol) {
    const double f0 = f(0.0) - target;
    double hi = guess;
    for (int i = 0; i < 20; ++i) {
        if ((f(hi) - target) * f0 <= 0.0) {
            return solve_bracketed(f, 0.0, hi, target, tol);
        }
        hi *= 1.5;
    }
    throw NumericalError("calibration: target unreachable");
}

template <class F>
double golden_max(F&& f, double lo, double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 > f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    return 0.5 * (lo + hi);
}

int resolved_n_max(const ScenarioConfig& cfg, const RunOptions& opts) {
    const int n = opts.n_max.value_or(cfg.n_max);
    if (n < 2) {
        throw ConfigError("n_max must be >= 2");
    }
    return n;
}

RunResult base_result(const ScenarioConfig& cfg, int n_max) {
    RunResult r;
    r.kind = cfg.kind;
    r.name = cfg.name;
    r.config_text = cfg.text;
    r.config_format = cfg.format;
    r.n_max = n_max;
    r.metrics = json::object();
    r.metadata = json::object();
    r.convergence = json::object();
    return r;
}

void check_top_level(const ScenarioConfig& cfg, std::initializer_list<std::string_view> extra) {
    std::vector<std::string_view> allowed{"scenario", "name", "n_max"};
    allowed.insert(allowed.end(), extra.begin(), extra.end());
    for (const auto& [k, v] : cfg.doc.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError("unknown key '" + k + "' for scenario " + std::string(to_string(cfg.kind)));
        }
    }
}

} // namespace

// ---------------------------------------------------------------- config

std::string_view to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::ground_sweep: return "ground-sweep";
    case ScenarioKind::two_photon_rabi: return "two-photon-rabi";
    case ScenarioKind::cascade_squeeze: return "cascade-squeeze";
    case ScenarioKind::custom: return "custom";
    }
    return "custom";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
    for (auto k : {ScenarioKind::ground_sweep, ScenarioKind::two_photon_rabi, ScenarioKind::cascade_squeeze,
                   ScenarioKind::custom}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

ScenarioConfig parse_scenario(std::string text, std::string_view format) {
    ScenarioConfig cfg;
    if (format == "toml") {
        cfg.doc = parse_toml(text);
    } else if (format == "json") {
        try {
            cfg.doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("json: ") + e.what());
        }
    } else {
        throw ConfigError("unsupported config format '" + std::string(format) + "'");
    }
    cfg.text = std::move(text);
    cfg.format = std::string(format);
    if (!cfg.doc.is_object()) {
        throw ConfigError("configuration must be a table");
    }
    if (!cfg.doc.contains("scenario") || !cfg.doc.at("scenario").is_string()) {
        throw ConfigError("missing 'scenario'");
    }
    cfg.kind = parse_scenario_kind(cfg.doc.at("scenario").get<std::string>());
    const int fallback_n = cfg.kind == ScenarioKind::ground_sweep ? 40 : 20;
    cfg.n_max = int_field(cfg.doc, "n_max", fallback_n, "config");
    if (cfg.n_max < 2) {
        throw ConfigError("n_max must be >= 2");
    }
    std::string default_name(to_string(cfg.kind));
    std::replace(default_name.begin(), default_name.end(), '-', '_');
    cfg.name = string_field(cfg.doc, "name", default_name, "config");
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) {
        throw ConfigError("name must be a plain file stem");
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string ext = path.extension().string();
    return parse_scenario(ss.str(), ext == ".json" ? "json" : "toml");
}

const SeriesTable& RunResult::table(std::string_view label) const {
    for (const auto& t : series) {
        if (t.label == label) {
            return t;
        }
    }
    throw InvalidArgument("RunResult: no series '" + std::string(label) + "'");
}

// ---------------------------------------------------------------- ground sweep

RunResult run_ground_sweep(const ScenarioConfig& cfg, const RunOptions& opts) {
    check_top_level(cfg, {"sweep", "symbols"});
    const Logger log(opts.log);
    const int n_max = resolved_n_max(cfg, opts);
    const int workers = resolve_workers(opts.workers);
    ExpressionContext ctx;
    resolve_symbols(cfg.doc, ctx);

    const json& sweep = section(cfg.doc, "sweep");
    check_keys(sweep, {"coupling", "detuning", "reference"}, "sweep");
    const auto axis = [&](const char* key, double lo, double hi, int count) {
        const json& a = section(sweep, key);
        check_keys(a, {"min", "max", "count"}, std::string("sweep.") + key);
        const int n = int_field(a, "count", count, std::string("sweep.") + key);
        if (n < 1) {
            throw ConfigError(std::string("sweep.") + key + ".count must be >= 1");
        }
        return linspace(field(a, "min", lo, ctx, std::string("sweep.") + key),
                        field(a, "max", hi, ctx, std::string("sweep.") + key), n);
    };
    SqueezingGrid grid{.couplings = axis("coupling", 0.05, 1.4, 50), .detunings = axis("detuning", -0.5, 1.0, 50)};
    for (double d : grid.detunings) {
        if (!(1.0 + d > 0.0)) {
            throw ConfigError("sweep.detuning: omega_q = 1 + detuning must stay positive");
        }
    }
    for (double g : grid.couplings) {
        if (!(g >= 0.0)) {
            throw ConfigError("sweep.coupling: couplings must be >= 0");
        }
    }

    RunResult r = base_result(cfg, n_max);
    log("ground sweep " + std::to_string(grid.couplings.size()) + "x" + std::to_string(grid.detunings.size()) +
        ", n_max " + std::to_string(n_max) + ", " + std::to_string(workers) + " worker(s)");
    const auto t0 = std::chrono::steady_clock::now();
    SqueezingMap map = ground_squeezing_map(grid, n_max, workers);
    const double sweep_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log("minimum " + format_number(map.min_value) + " at coupling " + format_number(map.min_coupling) +
        ", detuning " + format_number(map.min_detuning));

    r.metrics["minimum"] = {
        {"value", map.min_value}, {"coupling", map.min_coupling}, {"detuning", map.min_detuning}};
    if (sweep.contains("reference")) {
        const json& ref = section(sweep, "reference");
        check_keys(ref, {"coupling", "detuning"}, "sweep.reference");
        const double g = field(ref, "coupling", 0.0, ctx, "sweep.reference");
        const double d = field(ref, "detuning", 0.0, ctx, "sweep.reference");
        r.metrics["reference"] = {{"coupling", g},
                                  {"detuning", d},
                                  {"value", ground_quadrature_variance({.omega_q = 1.0 + d, .coupling = g}, n_max)}};
    }

    // Convergence at the minimum and the two grid corners.
    const std::vector<std::pair<double, double>> probes{
        {map.min_coupling, map.min_detuning},
        {grid.couplings.front(), grid.detunings.front()},
        {grid.couplings.back(), grid.detunings.back()}};
    json pts = json::array();
    double worst = 0.0;
    double energy = 0.0;
    for (const auto& [g, d] : probes) {
        const RabiParams p{.omega_q = 1.0 + d, .coupling = g};
        const double a = ground_quadrature_variance(p, n_max);
        const double b = ground_quadrature_variance(p, n_max + 10);
        worst = std::max(worst, std::abs(a - b));
        energy = std::max(energy, energy_delta(build_rabi(p, n_max), build_rabi(p, n_max + 10)));
        pts.push_back({{"coupling", g}, {"detuning", d}, {"delta", std::abs(a - b)}});
    }
    r.convergence = {{"n_max", n_max},
                     {"n_max_probe", n_max + 10},
                     {"quantity", "s2n"},
                     {"probes", pts},
                     {"max_delta", worst},
                     {"tolerance", 1e-4},
                     {"energy_delta", energy},
                     {"energy_tolerance", 1e-6},
                     {"passed", worst < 1e-4 && energy < 1e-6}};

    const RabiParams corner{.omega_q = 1.0 + grid.detunings.back(), .coupling = grid.couplings.back()};
    r.spectrum = spectrum_summary(diagonalize(build_rabi(corner, n_max)));
    r.spectrum["model"] = {{"coupling", corner.coupling}, {"omega_q", corner.omega_q}};
    r.metadata = {{"workers", workers}, {"sweep_seconds", sweep_seconds}, {"points", map.values.size()}};
    r.map = std::move(map);
    r.wall_time = log.elapsed();
    return r;
}

// ---------------------------------------------------------------- two-photon oscillations

RunResult run_two_photon(const ScenarioConfig& cfg, const RunOptions& opts) {
    check_top_level(cfg, {"model", "splitting", "dissipation", "drive", "time", "solver", "frames", "symbols"});
    const Logger log(opts.log);
    const int n_max = resolved_n_max(cfg, opts);
    ExpressionContext ctx;
    resolve_symbols(cfg.doc, ctx, false);

    const json& model = section(cfg.doc, "model");
    RabiParams p = rabi_params(model, ctx, 2.0);
    if (p.theta == 0.0) {
        throw ConfigError("two-photon-rabi needs theta != 0: the standard Rabi model has no two-photon splitting");
    }
    const bool auto_wq = !model.contains("omega_q") || is_auto(model.at("omega_q"));
    double gap = 0.0;
    if (auto_wq) {
        const json& sc = section(cfg.doc, "splitting");
        check_keys(sc, {"omega_q_min", "omega_q_max", "points"}, "splitting");
        const SplittingScan scan{.omega_q_min = field(sc, "omega_q_min", 1.5, ctx, "splitting"),
                                 .omega_q_max = field(sc, "omega_q_max", 2.5, ctx, "splitting"),
                                 .points = int_field(sc, "points", 101, "splitting")};
        const auto res = effective_splitting(p, n_max, scan);
        p.omega_q = res.omega_q_star;
        gap = res.gap;
    } else {
        gap = level_gap(p, n_max, p.omega_q, 2);
    }
    log("omega_q = " + format_number(p.omega_q) + ", 2 Omega_eff = " + format_number(gap));

    const QOperator h = build_rabi(p, n_max);
    const Spectrum s = diagonalize(h);
    ctx.spectrum = &s;
    ctx.symbols["omega_q"] = p.omega_q;
    ctx.symbols["Omega_eff"] = 0.5 * gap;
    ctx.symbols["T_R"] = 2.0 * kPi / (0.5 * gap);
    resolve_symbols(cfg.doc, ctx);

    auto plans = pulse_plans(cfg.doc, ctx);
    if (plans.empty()) {
        throw ConfigError("two-photon-rabi needs at least one pulse");
    }
    const std::string drive_name = drive_operator(cfg.doc, "sigma_x");
    const QOperator drive_op = named_operator(drive_name, n_max, 2);
    const EvolveOptions solver = solver_options(cfg.doc, ctx, opts.log);
    const double window = cutoff_window(cfg.doc, ctx);
    const int levels = s.levels_within(window);

    // Pulse calibration on the coherent problem restricted to the retained levels.
    const Matrix v = s.to_dressed(drive_op.mat());
    const double coupling_0 = std::sqrt(std::norm(v(2, 0)) + std::norm(v(3, 0)));
    json calib = json::array();
    for (std::size_t i = 0; i < plans.size(); ++i) {
        if (plans[i].auto_phase) {
            throw ConfigError("two-photon-rabi: pulse phase 'auto' is not supported");
        }
        if (!plans[i].auto_amplitude) {
            continue;
        }
        const double area = plans[i].effective_area.value_or(kPi / 3.0);
        const double target = std::pow(std::cos(0.5 * area), 2);
        const auto ground_population = [&](double amplitude) {
            auto trial = plans;
            trial[i].pulse.amplitude = amplitude;
            for (auto& q : trial) {
                if (q.auto_amplitude && &q != &trial[i]) {
                    q.pulse.amplitude = 0.0;
                }
            }
            const DriveSpec d(pulses_of(trial), drive_op);
            Vector psi = Vector::Zero(levels);
            psi(0) = 1.0;
            const double t_end = trial[i].pulse.center + 8.5 * trial[i].pulse.width;
            psi = propagate_pure(psi, s, d, trial[i].pulse.center - 8.5 * trial[i].pulse.width, t_end, solver.step,
                                 levels, solver.drive_floor);
            return std::norm(psi(0));
        };
        const double amplitude = calibrate(ground_population, 0.7 * area / coupling_0, target, 1e-10);
        plans[i].pulse.amplitude = amplitude;
        calib.push_back({{"pulse", i},
                         {"effective_area", area},
                         {"target_ground_population", target},
                         {"achieved_ground_population", ground_population(amplitude)},
                         {"amplitude", amplitude},
                         {"coupling_element", coupling_0}});
        log("pulse " + std::to_string(i) + " amplitude " + format_number(amplitude) + " for area " +
            format_number(area));
    }


    const auto channels = channel_specs(cfg.doc, ctx);
    const double t0 = plans.front().pulse.center;
    const double tau = plans.front().pulse.width;
    const double t_rabi = ctx.symbols.at("T_R");
    const auto times = time_grid(cfg.doc, ctx, t0 + 4.0 * t_rabi, 0.25);
    const auto frames =
        frame_plans(cfg.doc, ctx, {{.label = "rotating", .omega = 0.5 * plans.front().pulse.carrier, .phi = {}}});

    // The same configuration at another truncation (carriers and amplitudes
    // stay as resolved at n_max).
    const auto simulate_at = [&](int n, const Spectrum& sp) {
        Simulation sim;
        sim.spectrum = &sp;
        sim.field = positive_part(named_operator("x", n, 2), sp);
        sim.emitter = positive_part(
            embed_atom(n, std::cos(p.theta) * two_level_ops().sigma_x + std::sin(p.theta) * two_level_ops().sigma_z),
            sp);
        sim.drive.emplace(pulses_of(plans), named_operator(drive_name, n, 2));
        sim.jumps = build_channels(channels, sp, n, window);
        sim.rho0_dressed = Matrix::Zero(sp.size(), sp.size());
        sim.rho0_dressed(0, 0) = 1.0;
        sim.times = times;
        sim.opts = solver;
        return simulate(sim);
    };

    RunResult r = base_result(cfg, n_max);
    log("evolving " + std::to_string(times.size()) + " outputs to t = " + format_number(times.back()));
    const MomentSeries m = simulate_at(n_max, s);
    r.series = make_tables(m, frames, r.metadata);
    log("evolution done");

    const SeriesTable& main = r.series.front();
    const double pre_end = t0 - 5.0 * tau;
    const double post_start = t0 + 5.0 * tau;
    const double t_end = times.back();
    const auto pre1 = column(main, &SeriesRow::s1n_gen, times.front(), pre_end);
    const auto pre2 = column(main, &SeriesRow::s2n_gen, times.front(), pre_end);
    const auto post_t = times_in(main, post_start, t_end);
    const double min_period = 0.1 * t_rabi;
    const double max_period = std::max(min_period * 2.0, (t_end - post_start) / 1.5);
    const auto period_of = [&](std::optional<double> SeriesRow::*member) {
        const auto y = column(main, member, post_start, t_end);
        if (y.size() < 8) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        return dominant_period(post_t, y, min_period, max_period);
    };
    const double pop_period = period_of(&SeriesRow::pop_q);
    const double flux_period = period_of(&SeriesRow::flux);
    const double s1_period = period_of(&SeriesRow::s1n_gen);
    const double s2_period = period_of(&SeriesRow::s2n_gen);
    r.metrics = {{"omega_q", p.omega_q},
                 {"two_omega_eff", gap},
                 {"rabi_period", t_rabi},
                 {"pulse_center", t0},
                 {"pulse_width", tau},
                 {"pre_pulse_end", pre_end},
                 {"pre_pulse_max_abs", std::max(max_abs_of(pre1), max_abs_of(pre2))},
                 {"min_s1n_gen", min_of(column(main, &SeriesRow::s1n_gen, times.front(), t_end))},
                 {"min_s2n_gen", min_of(column(main, &SeriesRow::s2n_gen, times.front(), t_end))},
                 {"population_period", pop_period},
                 {"flux_period", flux_period},
                 {"s1n_period", s1_period},
                 {"s2n_period", s2_period},
                 {"s1n_period_over_twice_population", s1_period / (2.0 * pop_period)},
                 {"s2n_period_over_twice_population", s2_period / (2.0 * pop_period)},
                 {"s1n_period_over_rabi", s1_period / t_rabi},
                 {"s2n_period_over_rabi", s2_period / t_rabi},
                 {"max_pop_q", max_abs_of(column(main, &SeriesRow::pop_q, times.front(), t_end))}};

    r.spectrum = spectrum_summary(s);
    r.spectrum["model"] = {{"omega_c", p.omega_c}, {"omega_q", p.omega_q}, {"coupling", p.coupling}, {"theta", p.theta}};
    const double e_delta = energy_delta(h, build_rabi(p, n_max + 10));
    r.convergence = {{"n_max", n_max},
                     {"n_max_probe", n_max + 10},
                     {"energy_delta", e_delta},
                     {"energy_tolerance", 1e-6},
                     {"dynamics_probed", opts.probe_convergence}};
    bool passed = e_delta < 1e-6;
    if (opts.probe_convergence) {
        log("convergence re-run at n_max " + std::to_string(n_max + 10));
        const Spectrum big = diagonalize(build_rabi(p, n_max + 10));
        const MomentSeries mb = simulate_at(n_max + 10, big);
        const std::vector<double> probes{t0, t0 + 0.5 * t_rabi, t_end};
        const double d = series_delta(m, mb, main.frame, probes);
        r.convergence["probes"] = probes;
        r.convergence["max_delta"] = d;
        r.convergence["tolerance"] = 1e-4;
        passed = passed && d < 1e-4;
    }
    r.convergence["passed"] = passed;

    r.metadata["field"] = field_meta(positive_part(named_operator("x", n_max, 2), s));
    r.metadata["trajectory"] = trajectory_meta(m.traj);
    r.metadata["calibration"] = calib;
    r.metadata["drive_operator"] = drive_name;
    r.metadata["dissipation_levels"] = levels;
    r.metadata["omega_q_resolved"] = auto_wq;
    json pulses = json::array();
    for (const auto& q : plans) {
        pulses.push_back({{"amplitude", q.pulse.amplitude},
                          {"center", q.pulse.center},
                          {"width", q.pulse.width},
                          {"carrier", q.pulse.carrier},
                          {"phase", q.pulse.phase}});
    }
    r.metadata["pulses"] = pulses;
    r.wall_time = log.elapsed();
    return r;
}

// ---------------------------------------------------------------- cascade squeezing

RunResult run_cascade(const ScenarioConfig& cfg, const RunOptions& opts) {
    check_top_level(cfg, {"model", "dissipation", "drive", "time", "solver", "frames", "symbols", "cascade"});
    const Logger log(opts.log);
    const int n_max = resolved_n_max(cfg, opts);
    ExpressionContext ctx;
    resolve_symbols(cfg.doc, ctx, false);
    const CascadeParams p = cascade_params(section(cfg.doc, "model"), ctx);
    const QOperator h = build_cascade(p, n_max);
    const Spectrum s = diagonalize(h);
    ctx.spectrum = &s;

    // Lowest dressed state of the interacting g/e block.
    int ground = -1;
    for (int k = 0; k < s.size() && ground < 0; ++k) {
        double w = 0.0;
        for (int n = 0; n < s.space.factors().front(); ++n) {
            w += std::norm(s.states(bare_index(n, 1, 3), k)) + std::norm(s.states(bare_index(n, 2, 3), k));
        }
        if (w > 0.5) {
            ground = k;
        }
    }
    if (ground < 0) {
        throw NumericalError("cascade: no dressed state in the g/e block");
    }
    const cplx c_g0 = s.states(bare_index(0, 1, 3), ground);
    const cplx c_g2 = s.states(bare_index(2, 1, 3), ground);
    if (std::abs(c_g2) < 1e-6) {
        throw ConfigError("cascade: |c_g2| = " + format_number(std::abs(c_g2)) +
                          " < 1e-6, coupling too weak for the two-photon transition");
    }
    const double e_ground = s.energies(ground);
    ctx.symbols["omega_0"] = e_ground;
    ctx.symbols["omega_1"] = e_ground - p.omega_s - 2.0 * p.omega_c;
    ctx.symbols["omega_2"] = e_ground - p.omega_s;
    resolve_symbols(cfg.doc, ctx);
    log("g/e block ground at index " + std::to_string(ground) + ", energy " + format_number(e_ground) +
        ", c_g0 " + format_number(std::abs(c_g0)) + ", c_g2 " + format_number(std::abs(c_g2)));

    const json& cc = section(cfg.doc, "cascade");
    check_keys(cc, {"mixing_tangent", "mixing_convention", "phase_frame_omega"}, "cascade");
    const double tangent = field(cc, "mixing_tangent", std::sqrt(2.0) / 2.0, ctx, "cascade");
    const std::string convention = string_field(cc, "mixing_convention", "double-angle", "cascade");
    double mixing = 0.0;
    if (convention == "double-angle") {
        mixing = 0.5 * std::atan(tangent);
    } else if (convention == "single-angle") {
        mixing = std::atan(tangent);
    } else {
        throw ConfigError("cascade.mixing_convention must be 'double-angle' or 'single-angle'");
    }
    const double target = std::pow(std::sin(mixing), 2);
    const double phase_omega = field(cc, "phase_frame_omega", p.omega_c, ctx, "cascade");

    auto plans = pulse_plans(cfg.doc, ctx);
    if (plans.size() != 2) {
        throw ConfigError("cascade-squeeze needs exactly two pulses");
    }
    if (plans[0].auto_phase) {
        throw ConfigError("cascade-squeeze: only the second pulse may use phase 'auto'");
    }
    const std::string drive_name = drive_operator(cfg.doc, "sigma_gs+sigma_sg");
    const QOperator drive_op = named_operator(drive_name, n_max, 3);
    const EvolveOptions solver = solver_options(cfg.doc, ctx, opts.log);
    const double window = cutoff_window(cfg.doc, ctx);
    const int levels = s.levels_within(window);
    if (ground >= levels) {
        throw ConfigError("cascade: dissipation.cutoff_window excludes the initial state");
    }
    const auto dressed_of = [&](int bare) {
        Eigen::Index k = 0;
        s.states.row(bare).cwiseAbs().maxCoeff(&k);
        return static_cast<int>(k);
    };
    const int k0 = dressed_of(bare_index(0, 0, 3));
    const int k2 = dressed_of(bare_index(2, 0, 3));
    if (k0 >= levels || k2 >= levels) {
        throw ConfigError("cascade: dissipation.cutoff_window excludes the target states");
    }
    const Matrix v = s.to_dressed(drive_op.mat());
    const DressedDecomposition field = positive_part(named_operator("x", n_max, 3), s);

    const auto& g1 = plans[0].pulse;
    const auto& g2 = plans[1].pulse;
    const double w_start = std::min(g1.center - 8.5 * g1.width, g2.center - 8.5 * g2.width);
    const double w_end = std::max(g1.center + 8.5 * g1.width, g2.center + 8.5 * g2.width);
    Vector psi_init = Vector::Zero(levels);
    psi_init(ground) = 1.0;
    const auto run_pure = [&](const std::vector<PulsePlan>& pl, double from, double to) {
        const DriveSpec d(pulses_of(pl), drive_op);
        return propagate_pure(psi_init, s, d, from, to, solver.step, levels, solver.drive_floor);
    };

    json calib = json::object();
    calib["target_state_2_population"] = target;
    if (plans[0].auto_amplitude) {
        const auto pop2 = [&](double a) {
            auto trial = plans;
            trial[0].pulse.amplitude = a;
            trial[1].pulse.amplitude = 0.0;
            const double from = trial[0].pulse.center - 8.5 * trial[0].pulse.width;
            return std::norm(run_pure(trial, from, trial[0].pulse.center + 8.5 * trial[0].pulse.width)(k2));
        };
        const double guess = 0.7 * 2.0 * std::asin(std::sqrt(target)) / std::abs(v(k2, ground));
        plans[0].pulse.amplitude = calibrate(pop2, guess, target, 1e-10);
        calib["pulse1_amplitude"] = plans[0].pulse.amplitude;
        log("pulse 1 amplitude " + format_number(plans[0].pulse.amplitude));
    }
    if (plans[1].auto_amplitude) {
        const auto pop0 = [&](double a) {
            auto trial = plans;
            trial[1].pulse.amplitude = a;
            return std::norm(run_pure(trial, w_start, w_end)(k0));
        };
        const double a_pi = kPi / std::abs(v(k0, ground));
        plans[1].pulse.amplitude = golden_max(pop0, 0.5 * a_pi, 1.6 * a_pi, 1e-5 * a_pi);
        calib["pulse2_amplitude"] = plans[1].pulse.amplitude;
        log("pulse 2 amplitude " + format_number(plans[1].pulse.amplitude));
    }
    const ReferenceFrame phase_frame{.omega = phase_omega, .phi = 0.5 * kPi};
    const FieldProbe probe(s.states, field, VarianceMode::generalized);
    const auto final_s2 = [&](const std::vector<PulsePlan>& pl) {
        Vector full = Vector::Zero(s.size());
        full.head(levels) = run_pure(pl, w_start, w_end);
        return probe.moments(full * full.adjoint()).variance(phase_frame.angle(w_end));
    };
    if (plans[1].auto_phase) {
        // S2 after both pulses is a + b cos(phase) + c sin(phase) in the second pulse's phase.
        std::array<double, 4> f{};
        for (int q = 0; q < 4; ++q) {
            auto trial = plans;
            trial[1].pulse.phase = 0.5 * kPi * q;
            f[q] = final_s2(trial);
        }
        const double b = 0.5 * (f[0] - f[2]);
        const double c = 0.5 * (f[1] - f[3]);
        double phase = std::atan2(-c, -b);
        plans[1].pulse.phase = phase < 0.0 ? phase + 2.0 * kPi : phase;
        calib["pulse2_phase"] = plans[1].pulse.phase;
        calib["phase_fit_samples"] = f;
        log("pulse 2 phase " + format_number(plans[1].pulse.phase));
    }
    {
        const Vector psi = run_pure(plans, w_start, w_end);
        calib["final_population_s0"] = std::norm(psi(k0));
        calib["final_population_s2"] = std::norm(psi(k2));
        calib["final_population_initial"] = std::norm(psi(ground));
        calib["coherent_s2n_gen"] = final_s2(plans);
        calib["coherent_reference_time"] = w_end;
    }

    const auto channels = channel_specs(cfg.doc, ctx);
    const auto times = time_grid(cfg.doc, ctx, g2.center + 11.0 * g2.width, 0.05);
    const auto frames = frame_plans(cfg.doc, ctx,
                                    {{.label = "static", .omega = 0.0, .phi = 0.0},
                                     {.label = "rotating", .omega = p.omega_c, .phi = 0.0}});
    const auto simulate_at = [&](int n, const Spectrum& sp) {
        Simulation sim;
        sim.spectrum = &sp;
        sim.field = positive_part(named_operator("x", n, 3), sp);
        sim.emitter = positive_part(named_operator("sigma_ge+sigma_eg", n, 3), sp);
        sim.drive.emplace(pulses_of(plans), named_operator(drive_name, n, 3));
        sim.jumps = build_channels(channels, sp, n, window);
        // The g/e block ground state is the same dressed level at any truncation.
        int g = -1;
        for (int k = 0; k < sp.size() && g < 0; ++k) {
            if (std::abs(sp.energies(k) - e_ground) < 1e-3) {
                g = k;
            }
        }
        if (g < 0) {
            throw NumericalError("cascade: initial level not found at n_max " + std::to_string(n));
        }
        sim.rho0_dressed = Matrix::Zero(sp.size(), sp.size());
        sim.rho0_dressed(g, g) = 1.0;
        sim.times = times;
        sim.opts = solver;
        return simulate(sim);
    };

    RunResult r = base_result(cfg, n_max);
    log("evolving " + std::to_string(times.size()) + " outputs to t = " + format_number(times.back()));
    const MomentSeries m = simulate_at(n_max, s);
    r.series = make_tables(m, frames, r.metadata);
    log("evolution done");

    const double t_end = times.back();
    const double hf_start = g2.center + 5.0 * g2.width;
    // Generalized residual in the frame closest to the cavity frequency: there
    // the physical squeezing is slowly varying.
    const SeriesTable* reference = &r.series.front();
    for (const auto& t : r.series) {
        if (std::abs(t.frame.omega - p.omega_c) < std::abs(reference->frame.omega - p.omega_c)) {
            reference = &t;
        }
    }
    const auto hf_times = times_in(*reference, hf_start, t_end);
    const double gen_rms =
        hf_times.size() > 2 ? detrended_rms(hf_times, column(*reference, &SeriesRow::s2n_gen, hf_start, t_end))
                            : std::numeric_limits<double>::quiet_NaN();
    json per_frame = json::object();
    for (const auto& t : r.series) {
        const auto std_rms = hf_times.size() > 2
                                 ? detrended_rms(hf_times, column(t, &SeriesRow::s2n_std, hf_start, t_end))
                                 : std::numeric_limits<double>::quiet_NaN();
        per_frame[t.label] = {
            {"omega", t.frame.omega},
            {"s2n_std_at_start", t.rows.front().s2n_std.value()},
            {"s2n_gen_at_start", t.rows.front().s2n_gen.value()},
            {"min_s2n_gen_after_second_pulse", min_of(column(t, &SeriesRow::s2n_gen, g2.center, t_end))},
            {"min_s2n_std_after_second_pulse", min_of(column(t, &SeriesRow::s2n_std, g2.center, t_end))},
            {"s2n_std_detrended_rms", std_rms},
            {"s2n_gen_detrended_rms", hf_times.size() > 2
                                          ? detrended_rms(hf_times, column(t, &SeriesRow::s2n_gen, hf_start, t_end))
                                          : std::numeric_limits<double>::quiet_NaN()},
            {"std_rms_over_reference_gen_rms", std_rms / gen_rms}};
    }
    r.metrics = {{"initial_level", ground},
                 {"initial_energy", e_ground},
                 {"c_g0", std::abs(c_g0)},
                 {"c_g2", std::abs(c_g2)},
                 {"omega_1", ctx.symbols.at("omega_1")},
                 {"omega_2", ctx.symbols.at("omega_2")},
                 {"mixing_tangent", tangent},
                 {"mixing_convention", convention},
                 {"mixing_angle", mixing},
                 {"amplitude_ratio", plans[0].pulse.amplitude * std::abs(c_g0) /
                                         (plans[1].pulse.amplitude * std::abs(c_g2))},
                 {"second_pulse_center", g2.center},
                 {"residual_window_start", hf_start},
                 {"reference_frame", reference->label},
                 {"reference_gen_detrended_rms", gen_rms},
                 {"frames", per_frame}};

    r.spectrum = spectrum_summary(s);
    r.spectrum["model"] = {{"omega_c", p.omega_c}, {"omega_s", p.omega_s}, {"omega_g", p.omega_g},
                           {"omega_e", p.omega_e}, {"coupling", p.coupling}};
    const double e_delta = energy_delta(h, build_cascade(p, n_max + 10));
    r.convergence = {{"n_max", n_max},
                     {"n_max_probe", n_max + 10},
                     {"energy_delta", e_delta},
                     {"energy_tolerance", 1e-6},
                     {"dynamics_probed", opts.probe_convergence}};
    bool passed = e_delta < 1e-6;
    if (opts.probe_convergence) {
        log("convergence re-run at n_max " + std::to_string(n_max + 10));
        const Spectrum big = diagonalize(build_cascade(p, n_max + 10));
        const MomentSeries mb = simulate_at(n_max + 10, big);
        const std::vector<double> probes{times.front(), g2.center, t_end};
        const double d = series_delta(m, mb, r.series.front().frame, probes);
        r.convergence["probes"] = probes;
        r.convergence["max_delta"] = d;
        r.convergence["tolerance"] = 1e-4;
        passed = passed && d < 1e-4;
    }
    r.convergence["passed"] = passed;

    r.metadata["field"] = field_meta(field);
    r.metadata["trajectory"] = trajectory_meta(m.traj);
    r.metadata["calibration"] = calib;
    r.metadata["drive_operator"] = drive_name;
    r.metadata["dissipation_levels"] = levels;
    json pulses = json::array();
    for (const auto& q : plans) {
        pulses.push_back({{"amplitude", q.pulse.amplitude},
                          {"center", q.pulse.center},
                          {"width", q.pulse.width},
                          {"carrier", q.pulse.carrier},
                          {"phase", q.pulse.phase}});
    }
    r.metadata["pulses"] = pulses;
    r.wall_time = log.elapsed();
    return r;
}

// ---------------------------------------------------------------- custom

RunResult run_custom(const ScenarioConfig& cfg, const RunOptions& opts) {
    check_top_level(cfg, {"model", "dissipation", "drive", "time", "solver", "frames", "symbols", "initial"});
    const Logger log(opts.log);
    const int n_max = resolved_n_max(cfg, opts);
    ExpressionContext ctx;
    resolve_symbols(cfg.doc, ctx, false);

    json model = section(cfg.doc, "model");
    const std::string kind = string_field(model, "kind", "rabi", "model");
    model.erase("kind");
    std::optional<QOperator> h;
    std::optional<QOperator> emitter;
    std::function<QOperator(int)> rebuild;
    int atom_dim = 2;
    json model_meta;
    if (kind == "rabi") {
        const RabiParams p = rabi_params(model, ctx, 1.0);
        rebuild = [p](int n) { return build_rabi(p, n); };
        emitter = embed_atom(n_max, std::cos(p.theta) * two_level_ops().sigma_x +
                                        std::sin(p.theta) * two_level_ops().sigma_z);
        model_meta = {{"kind", kind}, {"omega_c", p.omega_c}, {"omega_q", p.omega_q}, {"coupling", p.coupling},
                      {"theta", p.theta}};
    } else if (kind == "cascade") {
        const CascadeParams p = cascade_params(model, ctx);
        rebuild = [p](int n) { return build_cascade(p, n); };
        atom_dim = 3;
        emitter = named_operator("sigma_ge+sigma_eg", n_max, 3);
        model_meta = {{"kind", kind}, {"omega_c", p.omega_c}, {"omega_s", p.omega_s}, {"omega_g", p.omega_g},
                      {"omega_e", p.omega_e}, {"coupling", p.coupling}};
    } else {
        throw ConfigError("model.kind must be 'rabi' or 'cascade'");
    }
    h = rebuild(n_max);
    const Spectrum s = diagonalize(*h);
    ctx.spectrum = &s;
    resolve_symbols(cfg.doc, ctx);

    const auto plans = pulse_plans(cfg.doc, ctx);
    for (const auto& q : plans) {
        if (q.auto_amplitude || q.auto_phase) {
            throw ConfigError("custom scenarios need explicit pulse amplitudes and phases");
        }
    }
    const std::string drive_name = drive_operator(cfg.doc, atom_dim == 2 ? "sigma_x" : "sigma_gs+sigma_sg");
    int initial = 0;
    if (cfg.doc.contains("initial")) {
        const json& init = section(cfg.doc, "initial");
        check_keys(init, {"dressed"}, "initial");
        initial = int_field(init, "dressed", 0, "initial");
        if (initial < 0 || initial >= s.size()) {
            throw ConfigError("initial.dressed out of range");
        }
    }
    const EvolveOptions solver = solver_options(cfg.doc, ctx, opts.log);
    const double window = cutoff_window(cfg.doc, ctx);
    const auto channels = channel_specs(cfg.doc, ctx);
    const auto times = time_grid(cfg.doc, ctx, 100.0, 0.1);
    const auto frames = frame_plans(cfg.doc, ctx, {{.label = "rotating", .omega = 1.0, .phi = 0.0}});

    Simulation sim;
    sim.spectrum = &s;
    sim.field = positive_part(named_operator("x", n_max, atom_dim), s);
    sim.emitter = positive_part(*emitter, s);
    if (!plans.empty()) {
        sim.drive.emplace(pulses_of(plans), named_operator(drive_name, n_max, atom_dim));
    }
    sim.jumps = build_channels(channels, s, n_max, window);
    sim.rho0_dressed = Matrix::Zero(s.size(), s.size());
    sim.rho0_dressed(initial, initial) = 1.0;
    sim.times = times;
    sim.opts = solver;

    RunResult r = base_result(cfg, n_max);
    log("evolving " + std::to_string(times.size()) + " outputs to t = " + format_number(times.back()));
    const MomentSeries m = simulate(sim);
    r.series = make_tables(m, frames, r.metadata);

    json per_frame = json::object();
    for (const auto& t : r.series) {
        per_frame[t.label] = {{"min_s1n_gen", min_of(column(t, &SeriesRow::s1n_gen, times.front(), times.back()))},
                              {"min_s2n_gen", min_of(column(t, &SeriesRow::s2n_gen, times.front(), times.back()))},
                              {"min_s1n_std", min_of(column(t, &SeriesRow::s1n_std, times.front(), times.back()))},
                              {"min_s2n_std", min_of(column(t, &SeriesRow::s2n_std, times.front(), times.back()))}};
    }
    r.metrics = {{"frames", per_frame},
                 {"max_flux", max_abs_of(column(r.series.front(), &SeriesRow::flux, times.front(), times.back()))}};
    r.spectrum = spectrum_summary(s);
    r.spectrum["model"] = model_meta;
    const double e_delta = energy_delta(*h, rebuild(n_max + 10));
    r.convergence = {{"n_max", n_max},
                     {"n_max_probe", n_max + 10},
                     {"energy_delta", e_delta},
                     {"energy_tolerance", 1e-6},
                     {"dynamics_probed", false},
                     {"passed", e_delta < 1e-6}};
    r.metadata["field"] = field_meta(*sim.field);
    r.metadata["trajectory"] = trajectory_meta(m.traj);
    r.metadata["drive_operator"] = drive_name;
    r.metadata["initial_dressed_level"] = initial;
    r.wall_time = log.elapsed();
    return r;
}

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
    switch (cfg.kind) {
    case ScenarioKind::ground_sweep: return run_ground_sweep(cfg, opts);
    case ScenarioKind::two_photon_rabi: return run_two_photon(cfg, opts);
    case ScenarioKind::cascade_squeeze: return run_cascade(cfg, opts);
    case ScenarioKind::custom: return run_custom(cfg, opts);
    }
    throw ConfigError("unknown scenario kind");
}

// ---------------------------------------------------------------- output

std::string format_number(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

namespace {

void append_optional(std::string& out, const std::optional<double>& v) {
    out += ',';
    if (v) {
        out += format_number(*v);
    }
}

std::optional<double> parse_field(std::string_view f, std::size_t line) {
    if (f.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
        throw ConfigError("csv line " + std::to_string(line) + ": bad number '" + std::string(f) + "'");
    }
    return v;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

} // namespace

std::string format_series_csv(const SeriesTable& table) {
    std::string out(kSeriesHeader);
    out += '\n';
    for (const auto& r : table.rows) {
        out += format_number(r.t);
        append_optional(out, r.s1n_gen);
        append_optional(out, r.s2n_gen);
        append_optional(out, r.s1n_std);
        append_optional(out, r.s2n_std);
        append_optional(out, r.flux);
        append_optional(out, r.pop_q);
        out += '\n';
    }
    return out;
}

std::string format_map_csv(const SqueezingMap& map) {
    std::string out = "coupling,detuning,s2n\n";
    for (std::size_t i = 0; i < map.grid.couplings.size(); ++i) {
        for (std::size_t j = 0; j < map.grid.detunings.size(); ++j) {
            out += format_number(map.grid.couplings[i]) + ',' + format_number(map.grid.detunings[j]) + ',' +
                   format_number(map.at(i, j)) + '\n';
        }
    }
    return out;
}

std::vector<SeriesRow> parse_series_csv(std::string_view text) {
    std::vector<SeriesRow> rows;
    std::size_t line_no = 0;
    bool header = false;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        const std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (!header) {
            if (line != kSeriesHeader) {
                throw ConfigError("csv: unexpected header '" + std::string(line) + "'");
            }
            header = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::array<std::string_view, 7> f{};
        std::size_t count = 0;
        std::string_view rest = line;
        while (true) {
            const auto comma = rest.find(',');
            if (count == f.size()) {
                throw ConfigError("csv line " + std::to_string(line_no) + ": too many fields");
            }
            f[count++] = rest.substr(0, comma);
            if (comma == std::string_view::npos) {
                break;
            }
            rest = rest.substr(comma + 1);
        }
        if (count != f.size()) {
            throw ConfigError("csv line " + std::to_string(line_no) + ": expected 7 fields");
        }
        const auto t = parse_field(f[0], line_no);
        if (!t) {
            throw ConfigError("csv line " + std::to_string(line_no) + ": missing time");
        }
        rows.push_back(SeriesRow{.t = *t,
                                 .s1n_gen = parse_field(f[1], line_no),
                                 .s2n_gen = parse_field(f[2], line_no),
                                 .s1n_std = parse_field(f[3], line_no),
                                 .s2n_std = parse_field(f[4], line_no),
                                 .flux = parse_field(f[5], line_no),
                                 .pop_q = parse_field(f[6], line_no)});
    }
    if (!header) {
        throw ConfigError("csv: missing header");
    }
    return rows;
}

json sidecar(const RunResult& r) {
    json series = json::array();
    for (const auto& t : r.series) {
        series.push_back({{"label", t.label},
                          {"file", r.name + "_" + t.label + ".csv"},
                          {"frame", {{"omega", t.frame.omega}, {"phi", t.frame.phi}}},
                          {"rows", t.rows.size()}});
    }
    json out = {{"scenario", to_string(r.kind)},
                {"name", r.name},
                {"n_max", r.n_max},
                {"config", {{"format", r.config_format}, {"text", r.config_text}}},
                {"spectrum", r.spectrum},
                {"convergence", r.convergence},
                {"metrics", r.metrics},
                {"metadata", r.metadata},
                {"series", series},
                {"wall_time_seconds", r.wall_time}};
    if (r.map) {
        out["map"] = {{"file", r.name + "_map.csv"},
                      {"couplings", r.map->grid.couplings.size()},
                      {"detunings", r.map->grid.detunings.size()}};
    }
    return out;
}

std::vector<std::filesystem::path> emit(const RunResult& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error("cannot create " + dir.string() + ": " + ec.message());
    }
    std::vector<std::filesystem::path> written;
    for (const auto& t : r.series) {
        written.push_back(dir / (r.name + "_" + t.label + ".csv"));
        write_file(written.back(), format_series_csv(t));
    }
    if (r.map) {
        written.push_back(dir / (r.name + "_map.csv"));
        write_file(written.back(), format_map_csv(*r.map));
    }
    written.push_back(dir / (r.name + ".json"));
    write_file(written.back(), sidecar(r).dump(2) + '\n');
    written.push_back(dir / (r.name + ".config." + (r.config_format.empty() ? "toml" : r.config_format)));
    write_file(written.back(), r.config_text);
    return written;
}

} // namespace usq
