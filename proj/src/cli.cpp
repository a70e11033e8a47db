#include "cladyn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cladyn/errors.hpp"
#include "cladyn/exact.hpp"
#include "cladyn/mixed.hpp"
#include "cladyn/reduced.hpp"
#include "cladyn/scenario.hpp"
#include "cladyn/series.hpp"

namespace cladyn {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kToolVersion = "cladyn 1.0.0";

std::string format17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fnv1a_hex(const std::string& data) {
    unsigned long long h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", h);
    return buf;
}

struct Invocation {
    std::string subcommand;
    std::string scenario_path;
    std::string out_dir = ".";
    unsigned long long seed = 0;
    std::vector<std::pair<std::string, std::string>> overrides;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Invocation parse_args(const std::vector<std::string>& argv) {
    if (argv.empty()) throw UsageError("usage: cladyn {run|compare|validate} SCENARIO [flags]");
    Invocation inv;
    inv.subcommand = argv[0];
    if (inv.subcommand != "run" && inv.subcommand != "compare" && inv.subcommand != "validate")
        throw UsageError("unknown subcommand '" + inv.subcommand + "'");

    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& arg = argv[i];
        const auto next = [&](const char* flag) -> const std::string& {
            if (i + 1 >= argv.size())
                throw UsageError(std::string(flag) + " requires an argument");
            return argv[++i];
        };
        if (arg == "--out") {
            inv.out_dir = next("--out");
        } else if (arg == "--seed") {
            try {
                inv.seed = std::stoull(next("--seed"));
            } catch (const std::exception&) {
                throw UsageError("--seed requires an unsigned integer");
            }
        } else if (arg == "--override") {
            const std::string& kv = next("--override");
            const std::size_t eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw UsageError("--override expects key=value");
            inv.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        } else if (!arg.empty() && arg[0] == '-') {
            throw UsageError("unknown flag '" + arg + "'");
        } else if (inv.scenario_path.empty()) {
            inv.scenario_path = arg;
        } else {
            throw UsageError("unexpected positional argument '" + arg + "'");
        }
    }
    if (inv.scenario_path.empty()) throw UsageError("missing scenario file");
    return inv;
}

std::string apply_overrides(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
    if (overrides.empty()) return text;
    json doc = json::parse(text);  // syntax errors surface later with line info
    for (const auto& [path, value] : overrides) {
        json* node = &doc;
        std::size_t start = 0;
        while (true) {
            const std::size_t dot = path.find('.', start);
            const std::string key = path.substr(start, dot - start);
            if (dot == std::string::npos) {
                json parsed;
                try {
                    parsed = json::parse(value);
                } catch (const json::parse_error&) {
                    parsed = value;  // treat unparsable values as strings
                }
                (*node)[key] = parsed;
                break;
            }
            node = &(*node)[key];
            start = dot + 1;
        }
    }
    return doc.dump();
}

class CsvWriter {
  public:
    CsvWriter(const fs::path& path, const std::string& scenario_hash, const std::string& name,
              const std::string& mode, unsigned long long seed,
              const std::vector<std::string>& columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open output file " + path.string());
        out_ << "# " << kToolVersion << " simulation output\n";
        out_ << "# scenario: " << name << "\n";
        out_ << "# mode: " << mode << "\n";
        out_ << "# scenario_fnv1a: " << scenario_hash << "\n";
        out_ << "# seed: " << seed << "\n";
        out_ << "# columns: " << columns.size() << "\n";
        out_ << "# number_format: %.17g\n";
        out_ << "# line_endings: lf\n";
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << format17(values[i]) << (i + 1 < values.size() ? "," : "\n");
    }

  private:
    std::ofstream out_;
};

struct Context {
    ScenarioConfig cfg;
    std::string hash;
    fs::path out_dir;
    unsigned long long seed = 0;
    RunReport report;

    fs::path artifact(const std::string& suffix) const { return out_dir / (cfg.name + suffix); }
};

IntegratorOptions exact_options(const ScenarioConfig& cfg) {
    IntegratorOptions opts;
    opts.rtol = cfg.integrator.rtol;
    opts.atol = cfg.integrator.atol;
    opts.sample_stride =
        cfg.integrator.sample_stride > 0.0 ? cfg.integrator.sample_stride : cfg.horizon_t / 5000.0;
    return opts;
}

// Populations and phases of psi expanded in the eigenframe at R = r0.
SimplexState initial_simplex_from_psi(const ScenarioConfig& cfg, const HamiltonianModel& model) {
    const AdiabaticFrame frame = eigenframe(model.hamiltonian(cfg.r0), cfg.r0, cfg.gap_tol);
    const CVector c = frame.vectors.adjoint() * (*cfg.psi0);
    RVector p = c.cwiseAbs2();
    p /= p.sum();
    RVector phi(p.size());
    for (Eigen::Index l = 0; l < c.size(); ++l)
        phi(l) = (std::abs(c(l)) > 1e-14) ? std::arg(c(l)) : 0.0;
    return SimplexState::checked(std::move(p), std::move(phi), cfg.r0);
}

void write_exact_csvs(Context& ctx, const Trajectory& traj, const AdiabaticSeries& series) {
    const ScenarioConfig& cfg = ctx.cfg;
    const int d = cfg.dim;

    std::vector<std::string> cols{"t"};
    for (int i = 1; i <= d; ++i) {
        cols.push_back("psi" + std::to_string(i) + "_re");
        cols.push_back("psi" + std::to_string(i) + "_im");
    }
    cols.push_back("R");
    cols.push_back("norm");
    const fs::path exact_path = ctx.artifact("_exact.csv");
    CsvWriter exact_csv(exact_path, ctx.hash, cfg.name, ctx.report.mode, ctx.seed, cols);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<double> row{traj.times[k]};
        for (int i = 0; i < d; ++i) {
            row.push_back(traj.states[k](i).real());
            row.push_back(traj.states[k](i).imag());
        }
        row.push_back(traj.r_values[k]);
        row.push_back(1.0 + traj.norm_drift[k]);
        exact_csv.row(row);
    }
    ctx.report.artifact_paths.push_back(exact_path.string());

    std::vector<std::string> acols{"t", "tau"};
    for (int i = 1; i <= d; ++i) acols.push_back("p_" + std::to_string(i));
    for (int i = 1; i <= d; ++i) acols.push_back("phi_" + std::to_string(i));
    for (int i = 1; i <= d; ++i) acols.push_back("gamma_" + std::to_string(i));
    const fs::path ad_path = ctx.artifact("_adiabatic.csv");
    CsvWriter ad_csv(ad_path, ctx.hash, cfg.name, ctx.report.mode, ctx.seed, acols);
    for (std::size_t k = 0; k < series.times.size(); ++k) {
        std::vector<double> row{series.times[k], cfg.epsilon * series.times[k]};
        for (int i = 0; i < d; ++i) row.push_back(series.populations[k](i));
        for (int i = 0; i < d; ++i) row.push_back(series.phases[k](i));
        for (int i = 0; i < d; ++i) row.push_back(series.gamma[k](i));
        ad_csv.row(row);
    }
    ctx.report.artifact_paths.push_back(ad_path.string());
}

std::pair<Trajectory, AdiabaticSeries> run_exact_core(const ScenarioConfig& cfg) {
    const HamiltonianModel model = linear_model(cfg.linear().h0, cfg.linear().v);
    const FeedbackSpec feedback = scenario_feedback(cfg);
    Trajectory traj = integrate_closed_loop(model, feedback, *cfg.psi0, cfg.r0, cfg.horizon_t,
                                            exact_options(cfg));
    AdiabaticSeries series = extract_adiabatic_series(traj, model, cfg.gap_tol);
    return {std::move(traj), std::move(series)};
}

void run_exact(Context& ctx) {
    auto [traj, series] = run_exact_core(ctx.cfg);
    write_exact_csvs(ctx, traj, series);
    ctx.report.diagnostics["norm_drift_max"] = format17(traj.max_norm_drift());
    double min_gap = series.frame_gaps.empty() ? 0.0 : series.frame_gaps.front();
    for (double g : series.frame_gaps) min_gap = std::min(min_gap, g);
    ctx.report.diagnostics["min_frame_gap"] = format17(min_gap);
}

struct ReducedSetup {
    PayoffSource source;
    SimplexState initial;
    bool constant = false;
    RMatrix a;  // valid when constant
    RMatrix b;
};

ReducedSetup reduced_setup(const ScenarioConfig& cfg) {
    ReducedSetup setup{ConstantPayoffs{}, SimplexState{}, false, {}, {}};
    if (cfg.is_linear()) {
        const HamiltonianModel model = linear_model(cfg.linear().h0, cfg.linear().v);
        setup.source = FrameDependentPayoffs{model, cfg.observable, cfg.gap_tol};
        setup.initial = cfg.p0 ? SimplexState::checked(*cfg.p0, *cfg.phi0, cfg.r0)
                               : initial_simplex_from_psi(cfg, model);
    } else {
        const ConnectionMatrix k = scenario_connection(cfg);
        const CMatrix a_ad = scenario_adiabatic_observable(cfg);
        const PayoffMatrices payoffs = payoff_matrices(k, a_ad);
        setup.constant = true;
        setup.a = payoffs.a;
        setup.b = payoffs.b;
        setup.source = ConstantPayoffs{payoffs.a, payoffs.b, a_ad.diagonal().real()};
        if (!cfg.p0) throw ValueError("reduced runs on an abstract frame need initial.p");
        setup.initial = SimplexState::checked(*cfg.p0, *cfg.phi0, cfg.r0);
    }
    return setup;
}

void run_reduced(Context& ctx) {
    const ScenarioConfig& cfg = ctx.cfg;
    ReducedSetup setup = reduced_setup(cfg);
    const ReducedPath path = integrate_reduced(setup.initial, setup.source, cfg.horizon_tau,
                                               cfg.integrator.step, cfg.integrator.record_stride);

    RVector entropy_ref;
    if (setup.constant) {
        const Classification cls = classify_longtime(setup.a, setup.initial.p);
        entropy_ref = cls.point;
        ctx.report.diagnostics["classification"] =
            cls.kind == Classification::Kind::Conservative ? "conservative" : "extinction";
        std::ostringstream fp;
        fp << "[";
        for (Eigen::Index i = 0; i < cls.point.size(); ++i)
            fp << (i ? ", " : "") << format17(cls.point(i));
        fp << "]";
        ctx.report.diagnostics["fixed_point"] = fp.str();
        ctx.report.diagnostics["tamo_residual_max"] = format17(tamo_residual_max(path, setup.a));

        double drift = 0.0;
        bool entropy_defined = true;
        double s0 = 0.0;
        for (std::size_t k = 0; k < path.states.size() && entropy_defined; ++k) {
            try {
                const double s = relative_entropy(cls.point, path.states[k].p);
                if (k == 0) s0 = s;
                drift = std::max(drift, std::abs(s - s0));
            } catch (const SupportViolation&) {
                entropy_defined = false;
            }
        }
        ctx.report.diagnostics["entropy_drift_max"] =
            entropy_defined ? format17(drift) : "undefined";
    } else {
        ctx.report.diagnostics["classification"] = "indeterminate (tau-dependent payoffs)";
        ctx.report.diagnostics["tamo_residual_max"] = "undefined";
    }

    const int d = cfg.dim;
    std::vector<std::string> cols{"tau"};
    for (int i = 1; i <= d; ++i) cols.push_back("p_" + std::to_string(i));
    for (int i = 1; i <= d; ++i) cols.push_back("phi_" + std::to_string(i));
    cols.push_back("r_bar");
    cols.push_back("entropy");
    const fs::path path_csv = ctx.artifact("_reduced.csv");
    CsvWriter csv(path_csv, ctx.hash, cfg.name, ctx.report.mode, ctx.seed, cols);
    for (std::size_t k = 0; k < path.taus.size(); ++k) {
        std::vector<double> row{path.taus[k]};
        for (int i = 0; i < d; ++i) row.push_back(path.states[k].p(i));
        for (int i = 0; i < d; ++i) row.push_back(path.states[k].phi(i));
        row.push_back(path.states[k].r_bar);
        double entropy = std::numeric_limits<double>::quiet_NaN();
        if (entropy_ref.size() == d) {
            try {
                entropy = relative_entropy(entropy_ref, path.states[k].p);
            } catch (const SupportViolation&) {
            }
        }
        row.push_back(entropy);
        csv.row(row);
    }
    ctx.report.artifact_paths.push_back(path_csv.string());
}

MixedAmplitudes initial_mixed(const ScenarioConfig& cfg) {
    if (cfg.cbar0) return MixedAmplitudes::checked(*cfg.cbar0, cfg.r0);
    if (!cfg.psi0) throw ValueError("mixed runs need initial.cbar or initial.psi");
    if (!cfg.is_linear())
        throw ValueError("initial.psi for mixed runs requires the linear model");
    const HamiltonianModel model = linear_model(cfg.linear().h0, cfg.linear().v);
    const AdiabaticFrame frame = eigenframe(model.hamiltonian(cfg.r0), cfg.r0, cfg.gap_tol);
    const CVector c = frame.vectors.adjoint() * (*cfg.psi0);
    return MixedAmplitudes::checked(c * c.adjoint(), cfg.r0);
}

void run_mixed(Context& ctx) {
    const ScenarioConfig& cfg = ctx.cfg;
    const MixedScenario scenario = MixedScenario::checked(
        scenario_connection(cfg), scenario_adiabatic_observable(cfg),
        cfg.is_linear() ? std::nullopt : cfg.abstract_frame().energies,
        cfg.is_linear() ? std::nullopt : cfg.abstract_frame().energy_slopes);
    const MixedAmplitudes initial = initial_mixed(cfg);
    const MixedPath path = integrate_mixed(initial, scenario, cfg.horizon_tau,
                                           cfg.integrator.step, cfg.integrator.record_stride);

    const int d = cfg.dim;
    std::vector<std::string> cols{"tau"};
    for (int i = 1; i <= d; ++i)
        for (int j = 1; j <= d; ++j) {
            cols.push_back("cbar" + std::to_string(i) + std::to_string(j) + "_re");
            cols.push_back("cbar" + std::to_string(i) + std::to_string(j) + "_im");
        }
    cols.push_back("r_bar");
    cols.push_back("trace");
    const fs::path path_csv = ctx.artifact("_mixed.csv");
    CsvWriter csv(path_csv, ctx.hash, cfg.name, ctx.report.mode, ctx.seed, cols);
    for (std::size_t k = 0; k < path.taus.size(); ++k) {
        std::vector<double> row{path.taus[k]};
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                row.push_back(path.cbars[k](i, j).real());
                row.push_back(path.cbars[k](i, j).imag());
            }
        row.push_back(path.r_bars[k]);
        row.push_back(path.cbars[k].trace().real());
        csv.row(row);
    }
    ctx.report.artifact_paths.push_back(path_csv.string());

    ctx.report.diagnostics["trace_drift_max"] = format17(path.max_trace_drift());
    ctx.report.diagnostics["hermiticity_fixup_max"] = format17(path.max_hermiticity_fixup());
    double min_eig = path.min_eigenvalues.empty() ? 0.0 : path.min_eigenvalues.front();
    for (double e : path.min_eigenvalues) min_eig = std::min(min_eig, e);
    ctx.report.diagnostics["min_eigenvalue"] = format17(min_eig);
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return ys.front();
    const std::size_t k = static_cast<std::size_t>(it - xs.begin());
    if (k >= xs.size()) return ys.back();
    const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return ys[k - 1] + w * (ys[k] - ys[k - 1]);
}

void run_compare(Context& ctx) {
    const ScenarioConfig& cfg = ctx.cfg;
    auto [traj, series] = run_exact_core(cfg);
    write_exact_csvs(ctx, traj, series);
    ctx.report.diagnostics["norm_drift_max"] = format17(traj.max_norm_drift());

    const int d = cfg.dim;
    const std::size_t n = series.times.size();
    std::vector<double> taus(n);
    for (std::size_t k = 0; k < n; ++k) taus[k] = cfg.epsilon * series.times[k];

    const double window = scenario_tau_window(cfg);
    std::vector<std::vector<double>> averaged(d);
    for (int l = 0; l < d; ++l) {
        std::vector<double> p(n);
        for (std::size_t k = 0; k < n; ++k) p[k] = series.populations[k](l);
        averaged[l] = window_average(taus, p, window);
    }

    // Reduced counterpart over the same slow-time span.
    ScenarioConfig reduced_cfg = cfg;
    reduced_cfg.horizon_tau = cfg.epsilon * cfg.horizon_t;
    ReducedSetup setup = reduced_setup(reduced_cfg);
    const ReducedPath path = integrate_reduced(setup.initial, setup.source,
                                               reduced_cfg.horizon_tau, cfg.integrator.step,
                                               cfg.integrator.record_stride);

    // Resample onto the exact grid and run the reduced series through the
    // same averaging window, so the truncated-window bias at the ends
    // cancels instead of polluting the deviation.
    std::vector<std::vector<double>> reduced_p(d);
    {
        std::vector<double> raw_taus = path.taus;
        std::vector<double> raw(path.taus.size());
        for (int l = 0; l < d; ++l) {
            for (std::size_t k = 0; k < path.taus.size(); ++k) raw[k] = path.states[k].p(l);
            std::vector<double> on_grid(n);
            for (std::size_t k = 0; k < n; ++k) on_grid[k] = interpolate(raw_taus, raw, taus[k]);
            reduced_p[l] = window_average(taus, on_grid, window);
        }
    }

    std::vector<std::string> cols{"tau"};
    for (int i = 1; i <= d; ++i) cols.push_back("p_exact_avg_" + std::to_string(i));
    for (int i = 1; i <= d; ++i) cols.push_back("p_reduced_" + std::to_string(i));
    for (int i = 1; i <= d; ++i) cols.push_back("deviation_" + std::to_string(i));
    const fs::path path_csv = ctx.artifact("_compare.csv");
    CsvWriter csv(path_csv, ctx.hash, cfg.name, ctx.report.mode, ctx.seed, cols);

    double sup = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> row{taus[k]};
        std::vector<double> dev(d);
        for (int l = 0; l < d; ++l) row.push_back(averaged[l][k]);
        for (int l = 0; l < d; ++l) {
            const double pr = reduced_p[l][k];
            row.push_back(pr);
            dev[l] = averaged[l][k] - pr;
            sup = std::max(sup, std::abs(dev[l]));
        }
        for (int l = 0; l < d; ++l) row.push_back(dev[l]);
        csv.row(row);
    }
    ctx.report.artifact_paths.push_back(path_csv.string());
    ctx.report.diagnostics["sup_norm_deviation"] = format17(sup);
    ctx.report.diagnostics["tau_window"] = format17(window);
}

void write_report(Context& ctx) {
    json doc;
    doc["scenario_name"] = ctx.report.scenario_name;
    doc["mode"] = ctx.report.mode;
    doc["wall_time_seconds"] = ctx.report.wall_time_seconds;
    doc["seed"] = ctx.report.seed;
    doc["tool"] = kToolVersion;
    doc["scenario_fnv1a"] = ctx.hash;
    for (const auto& [key, value] : ctx.report.diagnostics) doc["diagnostics"][key] = value;
    doc["artifact_paths"] = ctx.report.artifact_paths;

    const fs::path path = ctx.artifact("_report.json");
    std::ofstream out(path, std::ios::binary);
    out << doc.dump(2) << "\n";
    ctx.report.artifact_paths.push_back(path.string());
    std::cout << "report: " << path.string() << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& argv) {
    Invocation inv;
    try {
        inv = parse_args(argv);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }

    std::ifstream in(inv.scenario_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: file not found: " << inv.scenario_path << "\n";
        return 3;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();

    ScenarioConfig cfg;
    try {
        text = apply_overrides(text, inv.overrides);
        cfg = parse_scenario(text);
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (inv.subcommand == "validate") {
        try {
            const ValidationReport report = validate_scenario(cfg);
            std::cout << "scenario: " << cfg.name << "\n" << report.text();
            std::cout << "result: pass\n";
            return 0;
        } catch (const Error& e) {
            std::cerr << "validation error: " << e.what() << "\n";
            return 1;
        }
    }

    Context ctx;
    ctx.cfg = cfg;
    ctx.hash = fnv1a_hex(text);
    ctx.out_dir = inv.out_dir;
    ctx.seed = inv.seed;
    ctx.report.scenario_name = cfg.name;
    ctx.report.seed = inv.seed;

    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) {
        std::cerr << "error: cannot create output directory " << ctx.out_dir << "\n";
        return 3;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (inv.subcommand == "compare") {
            ctx.report.mode = "compare";
            run_compare(ctx);
        } else {
            ctx.report.mode = to_string(cfg.mode);
            switch (cfg.mode) {
                case RunMode::Exact: run_exact(ctx); break;
                case RunMode::Reduced: run_reduced(ctx); break;
                case RunMode::Mixed: run_mixed(ctx); break;
                case RunMode::Compare: run_compare(ctx); break;
            }
        }
    } catch (const Error& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    const auto t1 = std::chrono::steady_clock::now();
    ctx.report.wall_time_seconds = std::chrono::duration<double>(t1 - t0).count();

    write_report(ctx);
    return 0;
}

}  // namespace cladyn
