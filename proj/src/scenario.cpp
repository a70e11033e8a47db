#include "cladyn/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cladyn/errors.hpp"
#include "cladyn/mixed.hpp"

namespace cladyn {

using json = nlohmann::json;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

[[noreturn]] void missing(const std::string& path) {
    throw SchemaError("missing required field '" + path + "'");
}

const json& fetch(const json& node, const std::string& key, const std::string& path) {
    if (!node.is_object() || !node.contains(key)) missing(path);
    return node.at(key);
}

double number_at(const json& node, const std::string& path) {
    if (!node.is_number()) throw ParseError("field '" + path + "' must be a number");
    return node.get<double>();
}

int integer_at(const json& node, const std::string& path) {
    if (!node.is_number_integer()) throw ParseError("field '" + path + "' must be an integer");
    return node.get<int>();
}

std::string string_at(const json& node, const std::string& path) {
    if (!node.is_string()) throw ParseError("field '" + path + "' must be a string");
    return node.get<std::string>();
}

Complex complex_at(const json& node, const std::string& path) {
    if (node.is_number()) return Complex(node.get<double>(), 0.0);
    if (node.is_array() && node.size() == 2 && node[0].is_number() && node[1].is_number())
        return Complex(node[0].get<double>(), node[1].get<double>());
    throw ParseError("field '" + path + "' must be a number or an [re, im] pair");
}

CMatrix matrix_at(const json& node, const std::string& path, int dim) {
    if (!node.is_array() || static_cast<int>(node.size()) != dim)
        throw ParseError("field '" + path + "' must be a " + std::to_string(dim) + "-row matrix");
    CMatrix m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        const json& row = node[i];
        if (!row.is_array() || static_cast<int>(row.size()) != dim)
            throw ParseError("field '" + path + "' row " + std::to_string(i) +
                             " must have " + std::to_string(dim) + " entries");
        for (int j = 0; j < dim; ++j)
            m(i, j) = complex_at(row[j], path + "[" + std::to_string(i) + "][" +
                                             std::to_string(j) + "]");
    }
    return m;
}

RVector vector_at(const json& node, const std::string& path, int dim) {
    if (!node.is_array() || static_cast<int>(node.size()) != dim)
        throw ParseError("field '" + path + "' must be a vector of length " +
                         std::to_string(dim));
    RVector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = number_at(node[i], path + "[" + std::to_string(i) + "]");
    return v;
}

CVector cvector_at(const json& node, const std::string& path, int dim) {
    if (!node.is_array() || static_cast<int>(node.size()) != dim)
        throw ParseError("field '" + path + "' must be a vector of length " +
                         std::to_string(dim));
    CVector v(dim);
    for (int i = 0; i < dim; ++i)
        v(i) = complex_at(node[i], path + "[" + std::to_string(i) + "]");
    return v;
}

void require_hermitian_field(const CMatrix& m, const std::string& path) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (hermiticity_residual(m) > 1e-9 * scale)
        throw ValueError("field '" + path + "' is not Hermitian");
}

json complex_to_json(const Complex& z) {
    if (z.imag() == 0.0) return json(z.real());
    return json::array({z.real(), z.imag()});
}

json matrix_to_json(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

json vector_to_json(const RVector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json cvector_to_json(const CVector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
    return out;
}

double spectral_norm(const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Collisions between distinct level differences, the combinations excluded
// by the non-resonance condition (m != n, m != l).
void resonance_check(const RVector& energies, double threshold, double r_value, bool have_r,
                     double& margin, std::vector<std::string>& warnings) {
    const int d = static_cast<int>(energies.size());
    for (int m = 0; m < d; ++m) {
        for (int n = 0; n < d; ++n) {
            if (m == n) continue;
            for (int l = 0; l < d; ++l) {
                if (l == m) continue;
                for (int k = 0; k < d; ++k) {
                    if (k == l) continue;
                    // Report each unordered pair of differences once.
                    if (std::make_pair(m, n) >= std::make_pair(l, k)) continue;
                    const double gap = std::abs((energies(m) - energies(n)) -
                                                (energies(l) - energies(k)));
                    margin = std::min(margin, gap);
                    if (gap < threshold) {
                        std::ostringstream os;
                        os << "resonance: E" << m + 1 << "-E" << n + 1 << " and E" << l + 1
                           << "-E" << k + 1 << " collide (|diff| = " << gap << ")";
                        if (have_r) os << " at R = " << r_value;
                        warnings.push_back(os.str());
                    }
                }
            }
        }
    }
}

}  // namespace

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Exact: return "exact";
        case RunMode::Reduced: return "reduced";
        case RunMode::Mixed: return "mixed";
        case RunMode::Compare: return "compare";
    }
    return "unknown";
}

HamiltonianModel linear_model(const CMatrix& h0, const CMatrix& v) {
    if (h0.rows() != h0.cols() || v.rows() != v.cols() || h0.rows() != v.rows())
        throw DimensionMismatch("linear_model: H0 and V must be square and of equal size");
    const CMatrix h0c = h0;
    const CMatrix vc = v;
    return HamiltonianModel::checked(
        static_cast<int>(h0.rows()),
        [h0c, vc](double r) { return CMatrix(h0c + r * vc); },
        [vc](double) { return vc; });
}

ScenarioConfig parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        std::ostringstream os;
        os << "line " << line << ": " << e.what();
        throw ParseError(os.str());
    }
    if (!doc.is_object()) throw SchemaError("scenario document must be an object");

    ScenarioConfig cfg;
    cfg.name = string_at(fetch(doc, "name", "name"), "name");
    cfg.dim = integer_at(fetch(doc, "dim", "dim"), "dim");
    if (cfg.dim < 2) throw ValueError("field 'dim' must be at least 2");

    const json& model = fetch(doc, "model", "model");
    if (model.contains("linear") == model.contains("abstract_frame"))
        throw SchemaError("field 'model' must contain exactly one of 'linear', 'abstract_frame'");
    if (model.contains("linear")) {
        const json& lin = model.at("linear");
        ScenarioConfig::Linear m;
        m.h0 = matrix_at(fetch(lin, "h0", "model.linear.h0"), "model.linear.h0", cfg.dim);
        m.v = matrix_at(fetch(lin, "v", "model.linear.v"), "model.linear.v", cfg.dim);
        require_hermitian_field(m.h0, "model.linear.h0");
        require_hermitian_field(m.v, "model.linear.v");
        cfg.model = std::move(m);
    } else {
        const json& abs = model.at("abstract_frame");
        ScenarioConfig::AbstractFrame m;
        const CMatrix k = matrix_at(fetch(abs, "connection", "model.abstract_frame.connection"),
                                    "model.abstract_frame.connection", cfg.dim);
        if (anti_hermiticity_residual(k) > 1e-9 * std::max(1.0, k.cwiseAbs().maxCoeff()))
            throw ValueError("field 'model.abstract_frame.connection' is not anti-Hermitian");
        m.connection = k;
        if (abs.contains("energies"))
            m.energies = vector_at(abs.at("energies"), "model.abstract_frame.energies", cfg.dim);
        if (abs.contains("energy_slopes"))
            m.energy_slopes = vector_at(abs.at("energy_slopes"),
                                        "model.abstract_frame.energy_slopes", cfg.dim);
        cfg.model = std::move(m);
    }

    const json& feedback = fetch(doc, "feedback", "feedback");
    const json& obs = fetch(feedback, "observable", "feedback.observable");
    if (obs.is_string()) {
        if (string_at(obs, "feedback.observable") != "hybrid")
            throw ValueError("field 'feedback.observable' string form must be \"hybrid\"");
        cfg.hybrid_observable = true;
        if (cfg.is_linear())
            throw ValueError("hybrid observable requires the abstract_frame model");
        if (!cfg.abstract_frame().energies || !cfg.abstract_frame().energy_slopes)
            throw ValueError("hybrid observable requires energies and energy_slopes");
    } else {
        cfg.observable = matrix_at(obs, "feedback.observable", cfg.dim);
        require_hermitian_field(cfg.observable, "feedback.observable");
    }
    if (feedback.contains("form")) {
        const json& form = feedback.at("form");
        if (form.is_string()) {
            if (string_at(form, "feedback.form") != "expectation")
                throw ValueError("field 'feedback.form' string form must be \"expectation\"");
        } else if (form.is_object() && form.contains("open_loop")) {
            cfg.open_loop = true;
            const json& ol = form.at("open_loop");
            cfg.open_loop_constant =
                number_at(fetch(ol, "constant", "feedback.form.open_loop.constant"),
                          "feedback.form.open_loop.constant");
        } else {
            throw SchemaError("field 'feedback.form' must be \"expectation\" or {open_loop}");
        }
    }

    cfg.epsilon = number_at(fetch(doc, "epsilon", "epsilon"), "epsilon");
    if (cfg.epsilon < 0.0 || cfg.epsilon >= 1.0)
        throw ValueError("field 'epsilon' must lie in [0, 1)");

    const json& run = fetch(doc, "run", "run");
    const std::string mode = string_at(fetch(run, "mode", "run.mode"), "run.mode");
    if (mode == "exact") cfg.mode = RunMode::Exact;
    else if (mode == "reduced") cfg.mode = RunMode::Reduced;
    else if (mode == "mixed") cfg.mode = RunMode::Mixed;
    else if (mode == "compare") cfg.mode = RunMode::Compare;
    else throw ValueError("field 'run.mode' must be exact, reduced, mixed or compare");

    if (run.contains("horizon_t")) cfg.horizon_t = number_at(run.at("horizon_t"), "run.horizon_t");
    if (run.contains("horizon_tau"))
        cfg.horizon_tau = number_at(run.at("horizon_tau"), "run.horizon_tau");
    if ((cfg.mode == RunMode::Exact || cfg.mode == RunMode::Compare) && !(cfg.horizon_t > 0.0))
        throw ValueError("field 'run.horizon_t' must be positive for exact/compare runs");
    if ((cfg.mode == RunMode::Reduced || cfg.mode == RunMode::Mixed) && !(cfg.horizon_tau > 0.0))
        throw ValueError("field 'run.horizon_tau' must be positive for reduced/mixed runs");

    const json& initial = fetch(doc, "initial", "initial");
    if (initial.contains("psi"))
        cfg.psi0 = cvector_at(initial.at("psi"), "initial.psi", cfg.dim);
    if (initial.contains("p")) {
        cfg.p0 = vector_at(initial.at("p"), "initial.p", cfg.dim);
        cfg.phi0 = initial.contains("phi")
                       ? vector_at(initial.at("phi"), "initial.phi", cfg.dim)
                       : RVector(RVector::Zero(cfg.dim));
    }
    if (initial.contains("cbar")) {
        CMatrix c = matrix_at(initial.at("cbar"), "initial.cbar", cfg.dim);
        require_hermitian_field(c, "initial.cbar");
        cfg.cbar0 = std::move(c);
    }
    if (initial.contains("r_bar")) cfg.r0 = number_at(initial.at("r_bar"), "initial.r_bar");
    if (doc.contains("r0")) cfg.r0 = number_at(doc.at("r0"), "r0");

    const bool needs_psi = cfg.mode == RunMode::Exact || cfg.mode == RunMode::Compare;
    if (needs_psi && !cfg.psi0) missing("initial.psi");
    if (cfg.mode == RunMode::Reduced && !cfg.p0 && !cfg.psi0) missing("initial.p");
    if (cfg.mode == RunMode::Mixed && !cfg.cbar0 && !cfg.psi0) missing("initial.cbar");
    if (cfg.psi0 && std::abs(cfg.psi0->norm() - 1.0) > 1e-9)
        throw ValueError("field 'initial.psi' is not normalized");
    if (cfg.p0) {
        if (cfg.p0->minCoeff() < 0.0) throw ValueError("field 'initial.p' has negative entries");
        if (std::abs(cfg.p0->sum() - 1.0) > 1e-9)
            throw ValueError("field 'initial.p' does not sum to one");
    }

    if (doc.contains("integrator")) {
        const json& it = doc.at("integrator");
        if (it.contains("rtol")) cfg.integrator.rtol = number_at(it.at("rtol"), "integrator.rtol");
        if (it.contains("atol")) cfg.integrator.atol = number_at(it.at("atol"), "integrator.atol");
        if (it.contains("step")) cfg.integrator.step = number_at(it.at("step"), "integrator.step");
        if (it.contains("sample_stride"))
            cfg.integrator.sample_stride = number_at(it.at("sample_stride"),
                                                     "integrator.sample_stride");
        if (it.contains("tau_f")) cfg.integrator.tau_f = number_at(it.at("tau_f"),
                                                                    "integrator.tau_f");
        if (it.contains("record_stride"))
            cfg.integrator.record_stride = integer_at(it.at("record_stride"),
                                                      "integrator.record_stride");
        if (cfg.integrator.rtol <= 0.0 || cfg.integrator.atol <= 0.0 || cfg.integrator.step <= 0.0)
            throw ValueError("integrator tolerances and step must be positive");
        if (cfg.integrator.record_stride < 1)
            throw ValueError("field 'integrator.record_stride' must be >= 1");
    }
    if (doc.contains("gap_tol")) {
        cfg.gap_tol = number_at(doc.at("gap_tol"), "gap_tol");
        if (!(cfg.gap_tol > 0.0)) throw ValueError("field 'gap_tol' must be positive");
    }
    if (doc.contains("validation")) {
        const json& val = doc.at("validation");
        if (val.contains("r_min")) cfg.validation.r_min = number_at(val.at("r_min"),
                                                                    "validation.r_min");
        if (val.contains("r_max")) cfg.validation.r_max = number_at(val.at("r_max"),
                                                                    "validation.r_max");
        if (val.contains("samples"))
            cfg.validation.samples = integer_at(val.at("samples"), "validation.samples");
        if (cfg.validation.samples < 2) throw ValueError("field 'validation.samples' must be >= 2");
    }
    return cfg;
}

std::string render_scenario(const ScenarioConfig& cfg) {
    json doc;
    doc["name"] = cfg.name;
    doc["dim"] = cfg.dim;
    if (cfg.is_linear()) {
        doc["model"]["linear"]["h0"] = matrix_to_json(cfg.linear().h0);
        doc["model"]["linear"]["v"] = matrix_to_json(cfg.linear().v);
    } else {
        const auto& abs = cfg.abstract_frame();
        doc["model"]["abstract_frame"]["connection"] = matrix_to_json(abs.connection);
        if (abs.energies)
            doc["model"]["abstract_frame"]["energies"] = vector_to_json(*abs.energies);
        if (abs.energy_slopes)
            doc["model"]["abstract_frame"]["energy_slopes"] = vector_to_json(*abs.energy_slopes);
    }
    if (cfg.hybrid_observable) {
        doc["feedback"]["observable"] = "hybrid";
    } else {
        doc["feedback"]["observable"] = matrix_to_json(cfg.observable);
    }
    if (cfg.open_loop) {
        doc["feedback"]["form"]["open_loop"]["constant"] = cfg.open_loop_constant;
    } else {
        doc["feedback"]["form"] = "expectation";
    }
    doc["epsilon"] = cfg.epsilon;
    doc["run"]["mode"] = to_string(cfg.mode);
    if (cfg.horizon_t > 0.0) doc["run"]["horizon_t"] = cfg.horizon_t;
    if (cfg.horizon_tau > 0.0) doc["run"]["horizon_tau"] = cfg.horizon_tau;
    if (cfg.psi0) doc["initial"]["psi"] = cvector_to_json(*cfg.psi0);
    if (cfg.p0) {
        doc["initial"]["p"] = vector_to_json(*cfg.p0);
        doc["initial"]["phi"] = vector_to_json(*cfg.phi0);
    }
    if (cfg.cbar0) doc["initial"]["cbar"] = matrix_to_json(*cfg.cbar0);
    doc["r0"] = cfg.r0;
    doc["integrator"]["rtol"] = cfg.integrator.rtol;
    doc["integrator"]["atol"] = cfg.integrator.atol;
    doc["integrator"]["step"] = cfg.integrator.step;
    if (cfg.integrator.sample_stride > 0.0)
        doc["integrator"]["sample_stride"] = cfg.integrator.sample_stride;
    if (cfg.integrator.tau_f > 0.0) doc["integrator"]["tau_f"] = cfg.integrator.tau_f;
    doc["integrator"]["record_stride"] = cfg.integrator.record_stride;
    doc["gap_tol"] = cfg.gap_tol;
    if (cfg.validation.r_min) doc["validation"]["r_min"] = *cfg.validation.r_min;
    if (cfg.validation.r_max) doc["validation"]["r_max"] = *cfg.validation.r_max;
    doc["validation"]["samples"] = cfg.validation.samples;
    return doc.dump(2) + "\n";
}

CMatrix scenario_adiabatic_observable(const ScenarioConfig& cfg) {
    if (cfg.is_linear()) {
        const HamiltonianModel model = linear_model(cfg.linear().h0, cfg.linear().v);
        const AdiabaticFrame frame = eigenframe(model.hamiltonian(cfg.r0), cfg.r0, cfg.gap_tol);
        return adiabatic_matrix(cfg.observable, frame);
    }
    if (cfg.hybrid_observable) {
        const auto& abs = cfg.abstract_frame();
        return hybrid_observable(*abs.energies, *abs.energy_slopes, scenario_connection(cfg));
    }
    return cfg.observable;
}

ConnectionMatrix scenario_connection(const ScenarioConfig& cfg) {
    if (cfg.is_linear()) {
        const HamiltonianModel model = linear_model(cfg.linear().h0, cfg.linear().v);
        const AdiabaticFrame frame = eigenframe(model.hamiltonian(cfg.r0), cfg.r0, cfg.gap_tol);
        return connection_analytic(frame, model.derivative(cfg.r0), cfg.gap_tol);
    }
    return ConnectionMatrix::checked(cfg.abstract_frame().connection);
}

FeedbackSpec scenario_feedback(const ScenarioConfig& cfg) {
    if (!cfg.is_linear())
        throw ValueError("exact dynamics requires the linear model");
    if (cfg.open_loop) {
        const double c = cfg.open_loop_constant;
        return FeedbackSpec::checked(cfg.observable, cfg.epsilon,
                                     OpenLoop{[c](double) { return c; }});
    }
    return FeedbackSpec::checked(cfg.observable, cfg.epsilon);
}

double scenario_tau_window(const ScenarioConfig& cfg) {
    if (cfg.integrator.tau_f > 0.0) return cfg.integrator.tau_f;
    double min_gap;
    if (cfg.is_linear()) {
        const HamiltonianModel model = linear_model(cfg.linear().h0, cfg.linear().v);
        min_gap = eigenframe(model.hamiltonian(cfg.r0), cfg.r0, cfg.gap_tol).min_gap;
    } else if (cfg.abstract_frame().energies) {
        const RVector& e = *cfg.abstract_frame().energies;
        min_gap = (e.tail(e.size() - 1) - e.head(e.size() - 1)).minCoeff();
    } else {
        min_gap = 1.0;
    }
    return 20.0 * cfg.epsilon * (kTwoPi / min_gap);
}

ValidationReport validate_scenario(const ScenarioConfig& cfg) {
    ValidationReport report;
    report.min_gap = std::numeric_limits<double>::infinity();
    report.resonance_margin = std::numeric_limits<double>::infinity();
    const double resonance_threshold = 10.0 * cfg.gap_tol;

    if (cfg.epsilon > 0.1)
        report.warnings.push_back("epsilon > 0.1: the adiabatic reduction is not expected to hold");

    if (cfg.is_linear()) {
        const HamiltonianModel model = linear_model(cfg.linear().h0, cfg.linear().v);
        // Degeneracy at the initial R is a hard error.
        const AdiabaticFrame initial = eigenframe(model.hamiltonian(cfg.r0), cfg.r0, cfg.gap_tol);
        const CMatrix a_ad = adiabatic_matrix(cfg.observable, initial);
        report.max_abs_expectation = a_ad.diagonal().real().cwiseAbs().maxCoeff();

        const double r_lo = cfg.validation.r_min.value_or(cfg.r0 - 0.5);
        const double r_hi = cfg.validation.r_max.value_or(cfg.r0 + 0.5);
        const int samples = cfg.validation.samples;
        double max_slope = 0.0;
        for (int s = 0; s < samples; ++s) {
            const double r = r_lo + (r_hi - r_lo) * static_cast<double>(s) /
                                        static_cast<double>(samples - 1);
            try {
                const AdiabaticFrame frame = eigenframe(model.hamiltonian(r), r, cfg.gap_tol);
                report.min_gap = std::min(report.min_gap, frame.min_gap);
                resonance_check(frame.energies, resonance_threshold, r, true,
                                report.resonance_margin, report.warnings);
            } catch (const DegenerateSpectrum&) {
                std::ostringstream os;
                os << "degenerate spectrum inside the sampled range at R = " << r;
                report.warnings.push_back(os.str());
                report.min_gap = 0.0;
            }
            max_slope = std::max(max_slope, spectral_norm(model.derivative(r)));
        }
        if (report.min_gap > 0.0)
            report.adiabaticity_index =
                cfg.epsilon * max_slope / (report.min_gap * report.min_gap);
    } else {
        const auto& abs = cfg.abstract_frame();
        if (abs.energies) {
            RVector e = *abs.energies;
            std::sort(e.data(), e.data() + e.size());
            for (Eigen::Index n = 0; n + 1 < e.size(); ++n) {
                const double gap = e(n + 1) - e(n);
                report.min_gap = std::min(report.min_gap, gap);
                if (gap <= cfg.gap_tol)
                    throw DegenerateSpectrum("validate_scenario: declared energies are degenerate");
            }
            resonance_check(e, resonance_threshold, 0.0, false, report.resonance_margin,
                            report.warnings);
        } else {
            report.warnings.push_back("abstract frame declares no energies; gap checks skipped");
        }
        const CMatrix a_ad = scenario_adiabatic_observable(cfg);
        report.max_abs_expectation = a_ad.diagonal().real().cwiseAbs().maxCoeff();
    }

    // Deduplicate repeated resonance warnings from neighbouring samples.
    std::vector<std::string> unique;
    for (const std::string& w : report.warnings) {
        const std::string head = w.substr(0, w.find(" (|diff|"));
        bool seen = false;
        for (const std::string& u : unique)
            if (u.substr(0, u.find(" (|diff|")) == head) seen = true;
        if (!seen) unique.push_back(w);
    }
    report.warnings = std::move(unique);
    return report;
}

std::string ValidationReport::text() const {
    std::ostringstream os;
    os << "validation report\n";
    os << "  min gap over sampled range: " << min_gap << "\n";
    os << "  non-resonance margin:       " << resonance_margin << "\n";
    os << "  adiabaticity index:         " << adiabaticity_index << "\n";
    os << "  max |<n|A|n>| (initial):    " << max_abs_expectation << "\n";
    if (warnings.empty()) {
        os << "  warnings: none\n";
    } else {
        os << "  warnings:\n";
        for (const std::string& w : warnings) os << "    - " << w << "\n";
    }
    return os.str();
}

}  // namespace cladyn
