#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cladyn/exact.hpp"
#include "cladyn/spectral.hpp"
#include "cladyn/types.hpp"

namespace cladyn {

enum class RunMode { Exact, Reduced, Mixed, Compare };

std::string to_string(RunMode mode);

/// Declarative description of one simulation, loaded from a scenario file.
struct ScenarioConfig {
    struct Linear {
        CMatrix h0;
        CMatrix v;
    };
    struct AbstractFrame {
        CMatrix connection;
        std::optional<RVector> energies;
        std::optional<RVector> energy_slopes;
    };
    struct Validation {
        std::optional<double> r_min;  // defaults to r0 -/+ 0.5
        std::optional<double> r_max;
        int samples = 33;
    };
    struct Integrator {
        double rtol = 1e-9;
        double atol = 1e-12;
        double step = 1e-3;
        double sample_stride = 0.0;  // 0 = horizon / 5000
        double tau_f = 0.0;          // 0 = 20 * eps * (2 pi / min gap)
        int record_stride = 1;
    };

    std::string name;
    int dim = 0;
    std::variant<Linear, AbstractFrame> model;

    CMatrix observable;          // lab basis (linear) or adiabatic basis (abstract)
    bool hybrid_observable = false;  // build A = -dH/dR from energies and slopes
    bool open_loop = false;
    double open_loop_constant = 1.0;
    double epsilon = 0.0;

    RunMode mode = RunMode::Exact;
    double horizon_t = 0.0;
    double horizon_tau = 0.0;

    std::optional<CVector> psi0;
    std::optional<RVector> p0;
    std::optional<RVector> phi0;
    std::optional<CMatrix> cbar0;
    double r0 = 0.0;

    Integrator integrator;
    double gap_tol = 1e-8;
    Validation validation;

    bool is_linear() const { return std::holds_alternative<Linear>(model); }
    const Linear& linear() const { return std::get<Linear>(model); }
    const AbstractFrame& abstract_frame() const { return std::get<AbstractFrame>(model); }
};

/// Validation outcome; warnings are informational and never block a run.
struct ValidationReport {
    std::vector<std::string> warnings;
    double min_gap = 0.0;
    double resonance_margin = 0.0;  // smallest distance between distinct level differences
    double adiabaticity_index = 0.0;  // eps * max||dH|| / gap^2
    double max_abs_expectation = 0.0;  // max |<n|A|n>| over the initial frame

    bool passed() const { return true; }
    std::string text() const;
};

/// H[R] = H0 + R V with derivative V.
HamiltonianModel linear_model(const CMatrix& h0, const CMatrix& v);

/// Parses a scenario document. Throws ParseError (with line information),
/// SchemaError (missing or ill-typed fields) or ValueError (bad values).
ScenarioConfig parse_scenario(const std::string& text);

/// Serializes a config back to the document format; parse(render(cfg))
/// reproduces every number bit-exactly.
std::string render_scenario(const ScenarioConfig& cfg);

/// Gap, non-resonance and adiabaticity checks. Degeneracy of the initial
/// frame throws DegenerateSpectrum; everything else is reported as warnings.
ValidationReport validate_scenario(const ScenarioConfig& cfg);

/// Resolved pieces shared by the runners.
CMatrix scenario_adiabatic_observable(const ScenarioConfig& cfg);
ConnectionMatrix scenario_connection(const ScenarioConfig& cfg);
FeedbackSpec scenario_feedback(const ScenarioConfig& cfg);
double scenario_tau_window(const ScenarioConfig& cfg);

}  // namespace cladyn
