#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>

#include "beltrami.hpp"
#include "harness.hpp"

namespace qcs {

// ---------------------------------------------------------------------------
// maps from text

// "2", "-1.5", "0.3+2i", "-i", "1e-3-4.5i"
inline cplx parse_complex(const std::string& s) {
    static const std::regex re(R"(^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*(?:([+-]?)\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*([ij]))?\s*$)");
    std::smatch m;
    if (s.empty() || !std::regex_match(s, m, re) || (!m[1].matched && !m[4].matched))
        throw Error("config-error", "cannot read a complex number from '" + s + "'");
    double re_part = m[1].matched ? std::stod(m[1].str()) : 0.0, im = 0;
    if (m[4].matched) {
        im = m[3].matched ? std::stod(m[3].str()) : 1.0;
        if (m[2].str() == "-") im = -im;
        // a lone "-2i" lands in group 1
        if (m[1].matched && m[2].length() == 0 && !m[3].matched) {
            im = re_part;
            re_part = 0;
        }
    }
    return {re_part, im};
}

inline std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

struct MapSpec {
    std::string label;
    RationalMap map;
    std::optional<MisiurewiczParams> landing;
};

// Misiurewicz cubic preset: the critical orbit of -A lands on a repelling fixed point after 3 steps
inline constexpr double preset_A = 0.6320119980756195;
inline const cplx preset_B{-0.295397989875772, -0.8829924546402199};
inline constexpr int preset_k = 3;

// presets: misiurewicz-cubic, chebyshev (z^2-2), cantor-quadratic (z^2+4),
// quadratic:<c>, cubic:<A>:<B>; otherwise coefficients c0,c1,...,cd
inline MapSpec parse_map(const std::string& text) {
    auto landing_of = [](const RationalMap& R, double A, int k) -> std::optional<MisiurewiczParams> {
        auto lc = check_landing(R, -A, k);
        if (!lc.ok) return std::nullopt;
        return MisiurewiczParams{A, R.numerator()[0], k, lc.landing, lc.multiplier, lc.residual};
    };
    if (text == "misiurewicz-cubic") {
        // Newton-polish the stored B so the landing relation holds to rounding
        Polynomial q({0.0, cplx(-3 * preset_A * preset_A), 0.0, 1.0});
        cplx B = landing_newton(q, -preset_A, preset_k, preset_B).value_or(preset_B);
        RationalMap R = cubic_family(preset_A, B);
        return {text, R, landing_of(R, preset_A, preset_k)};
    }
    if (text == "chebyshev") return {text, quadratic_family(-2.0), std::nullopt};
    if (text == "cantor-quadratic") return {text, quadratic_family(4.0), std::nullopt};
    if (text.rfind("quadratic:", 0) == 0) return {text, quadratic_family(parse_complex(text.substr(10))), std::nullopt};
    if (text.rfind("cubic:", 0) == 0) {
        auto f = split(text.substr(6), ':');
        if (f.size() != 2 && f.size() != 3) throw Error("config-error", "cubic:<A>:<B>[:k] expected");
        double A = std::stod(f[0]);
        RationalMap R = cubic_family(A, parse_complex(f[1]));
        std::optional<MisiurewiczParams> l;
        if (f.size() == 3) l = landing_of(R, A, std::stoi(f[2]));
        return {text, R, l};
    }
    std::vector<cplx> c;
    for (auto& t : split(text, ',')) c.push_back(parse_complex(t));
    if (c.size() < 3) throw Error("config-error", "unknown map '" + text + "'");
    return {text, RationalMap(Polynomial(c)), std::nullopt};
}

inline std::string format_complex(cplx z, int prec = 12) {
    std::ostringstream os;
    os << std::setprecision(prec) << (z.real() == 0 ? 0.0 : z.real()) << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    return os.str();
}

// ---------------------------------------------------------------------------
// flat key = value configuration

struct ExperimentConfig {
    std::string map = "misiurewicz-cubic";
    std::string curve_center = "landing";  // or a complex number
    double curve_radius = 0;               // 0: half the distance to the nearest other postcritical/critical point
    int curve_vertices = 256;
    std::vector<int> depths{1, 2, 3};
    int resolution = 1024;
    cplx grid_center = 0;
    double half_width = 0;  // 0: from the filled Julia set's extent
    std::uint64_t seed = 1;
    int invariance_samples = 2000;
    int horizon = 200;
    std::string p = "auto";
    double p_min = 0.5, p_max = 0.6, p_step = 0.05;
    int max_iter = 200;
    double tol = 1e-8;
    double length_bound = 0;  // 0: degree times the base length
    int puncture_depth = 2;
    int fit_degree = 0;  // 0: degree of the map
    std::string out;
    bool render = false;  // portable-pixmap renders next to the report, needs out
};

inline ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    std::set<std::string> seen;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config-error", "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw Error("config-error", "duplicate key '" + key + "'");
        auto num = [&]() {
            std::size_t pos = 0;
            double v = std::stod(val, &pos);
            if (pos != val.size()) throw Error("config-error", "bad number for '" + key + "'");
            return v;
        };
        auto integer = [&]() {
            double v = num();
            if (v != std::floor(v)) throw Error("config-error", "integer expected for '" + key + "'");
            return static_cast<long long>(v);
        };
        try {
            if (key == "map") c.map = val;
            else if (key == "curve_center") c.curve_center = val;
            else if (key == "curve_radius") c.curve_radius = num();
            else if (key == "curve_vertices") c.curve_vertices = static_cast<int>(integer());
            else if (key == "depths") {
                c.depths.clear();
                for (auto& t : split(val, ',')) c.depths.push_back(std::stoi(t));
            } else if (key == "resolution") c.resolution = static_cast<int>(integer());
            else if (key == "grid_center") c.grid_center = parse_complex(val);
            else if (key == "half_width") c.half_width = num();
            else if (key == "seed") c.seed = std::stoull(val);
            else if (key == "invariance_samples") c.invariance_samples = static_cast<int>(integer());
            else if (key == "horizon") c.horizon = static_cast<int>(integer());
            else if (key == "p") {
                if (val != "auto") num();
                c.p = val;
            } else if (key == "p_min") c.p_min = num();
            else if (key == "p_max") c.p_max = num();
            else if (key == "p_step") c.p_step = num();
            else if (key == "max_iter") c.max_iter = static_cast<int>(integer());
            else if (key == "tol") c.tol = num();
            else if (key == "length_bound") c.length_bound = num();
            else if (key == "puncture_depth") c.puncture_depth = static_cast<int>(integer());
            else if (key == "fit_degree") c.fit_degree = static_cast<int>(integer());
            else if (key == "out") c.out = val;
            else if (key == "render") {
                if (val != "true" && val != "false") throw Error("config-error", "render must be true or false");
                c.render = val == "true";
            }
            else throw Error("config-error", "unknown key '" + key + "' on line " + std::to_string(lineno));
        } catch (const std::invalid_argument&) {
            throw Error("config-error", "bad value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw Error("config-error", "value out of range for '" + key + "'");
        }
    }
    if (c.depths.empty()) throw Error("config-error", "empty depth list");
    for (int d : c.depths)
        if (d < 1) throw Error("config-error", "depths must be >= 1");
    if (c.resolution < 16) throw Error("config-error", "resolution >= 16 required");
    if (!(c.p_min > 0 && c.p_min <= c.p_max && c.p_max < 1)) throw Error("config-error", "need 0 < p_min <= p_max < 1");
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("io-error", "cannot open " + path);
    return parse_config(f);
}

// ---------------------------------------------------------------------------
// pieces of the pipeline

// samples of the chart disk D(b, r) lying in the filled Julia set or within a sample spacing of it
// (Green's function distance estimate G / |grad G|), as a ray-extent polygon in w = (z - b) / r
inline JordanCurve chart_core(const RationalMap& R, cplx b, double r, int nr = 160, int nt = 256) {
    const double spacing = r * std::max(1.0 / nr, 2 * pi / nt);
    std::vector<double> ext(nt, 0.0);
    for (int t = 0; t < nt; ++t)
        for (int i = nr - 1; i >= 0; --i) {
            double rad = (i + 0.5) / nr;
            GreenValue g = green_with_gradient(R, b + r * std::polar(rad, 2 * pi * (t + 0.5) / nt));
            if (g.g == 0 || g.g < 2 * spacing * std::abs(g.grad)) {
                ext[t] = rad + 1.0 / nr;
                break;
            }
        }
    std::vector<double> w(nt);
    for (int t = 0; t < nt; ++t) w[t] = std::max({ext[t], ext[(t + 1) % nt], ext[(t + nt - 1) % nt], 0.02});
    std::vector<cplx> v(nt);
    for (int t = 0; t < nt; ++t) v[t] = std::polar(std::min(w[t], 0.999), 2 * pi * (t + 0.5) / nt);
    return JordanCurve(std::move(v), false);
}

inline double ring_inner_radius(const RationalMap& R, cplx b, double r) {
    JordanCurve core = chart_core(R, b, r);
    double top = 0;
    for (auto z : core.vertices()) top = std::max(top, std::abs(z));
    if (top >= 0.99) return 1.0;
    return largest_embedded_round_annulus(AnnulusRegion(JordanCurve::circle(0.0, 1.0, 512), core));
}

// backward orbit of the most repelling fixed point, up to about `count` points
inline std::vector<cplx> julia_sample(const RationalMap& R, std::size_t count = 20000) {
    auto fps = fixed_points(R);
    auto top = std::max_element(fps.begin(), fps.end(), [](auto& x, auto& y) { return std::abs(x.multiplier) < std::abs(y.multiplier); });
    std::vector<cplx> layer{top->z}, all{top->z};
    while (all.size() * R.degree() <= count) {
        std::vector<cplx> next;
        for (auto w : layer)
            for (auto z : preimage_list(R, w)) next.push_back(z);
        all.insert(all.end(), next.begin(), next.end());
        layer = std::move(next);
    }
    return all;
}

inline double julia_half_width(const RationalMap& R, cplx c) {
    double hw = 0;
    for (auto z : julia_sample(R)) hw = std::max({hw, std::abs(z.real() - c.real()), std::abs(z.imag() - c.imag())});
    return hw;
}

// escape-time shading, filled Julia set black; cells where sigma is non-zero tinted red
inline std::vector<std::uint8_t> escape_time_image(const RationalMap& R, const GridSpec& g, int horizon,
                                                   const BeltramiField* sigma = nullptr) {
    const double esc = polynomial_escape_radius(R);
    std::vector<std::uint8_t> rgb(3 * g.size(), 0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        cplx z = g.center(k);
        int n = 0;
        while (n < horizon && std::abs(z) <= esc) {
            z = R(z);
            ++n;
        }
        auto v = static_cast<std::uint8_t>(n < horizon ? 255 - std::min(255, 12 * n) : 0);
        rgb[3 * k] = rgb[3 * k + 1] = rgb[3 * k + 2] = v;
        if (sigma && (*sigma)[k] != cplx(0)) {
            rgb[3 * k] = 255;
            rgb[3 * k + 1] /= 3;
            rgb[3 * k + 2] /= 3;
        }
    }
    return rgb;
}

struct SurgeryChoice {
    int level = 0;
    JordanCurve curve;
    double curve_length = 0;
    int covering_degree = 1;
    cplx b;
    double radius = 0;
    double p_raw = 0;
};

// orbit of z under the conjugate form R o f stays outside D after leaving it, and escapes
inline bool target_is_safe(const QuasiregularMap& P, int horizon) {
    const Transplant& f = P.surgery();
    const double esc = polynomial_escape_radius(P.base());
    const auto& cfg = f.config();
    std::vector<cplx> probes{cfg.target};
    for (int k = 0; k < 32; ++k) probes.push_back(f.chart_inverse(f.blend().a() + cfg.safe_radius * std::polar(1.0, 2 * pi * k / 32)));
    for (cplx z : probes) {
        z = P.base()(z);
        bool escaped = false;
        for (int n = 0; n < horizon; ++n) {
            if (std::abs(z) > esc) {
                escaped = true;
                break;
            }
            if (P.in_disk(z)) return false;
            z = P.base()(z);
        }
        if (!escaped) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// report

struct DepthReport {
    int depth = 0;
    std::string status = "pending";
    std::string stage, error;
    SurgeryChoice choice;
    double p = 0, theta = 0, safe_radius = 0;
    cplx target;
    int census_n_alpha = 0, census_first_safe_index = 0, target_copy = 0;
    std::size_t support_cells = 0;
    double beltrami_norm = 0;
    InvarianceReport invariance;
    int iterations = 0;
    double solver_residual = 0;
    double fit_residual = 0;
    RationalMap fitted = quadratic_family(0.0);
    int fitted_degree = 0;
    int s_after = -1;
    double surgery_displacement = 0, straightening_displacement = 0;
    // escape-time consistency: critical orbits of R o f against those of the fitted map
    std::vector<int> conjugate_escape_steps, fitted_escape_steps;
    std::vector<std::string> artifacts;
};

struct ReportBundle {
    std::string map_label;
    RationalMap map = quadratic_family(0.0);
    std::string status = "failed";
    std::string note;
    int s_before = 0;
    std::vector<cplx> p_points;
    JordanCurve base_curve;
    double base_length = 0, length_bound = 0;
    double fundamental_level = 0;
    GridSpec grid;
    std::vector<DepthReport> depths;
    std::vector<std::string> artifacts;

    std::vector<double> beltrami_norms() const {
        std::vector<double> v;
        for (auto& d : depths) v.push_back(d.beltrami_norm);
        return v;
    }
    std::vector<double> surgery_displacements() const {
        std::vector<double> v;
        for (auto& d : depths) v.push_back(d.surgery_displacement);
        return v;
    }
    bool success() const { return status == "success"; }
    std::string text() const;
};

inline std::string ReportBundle::text() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "# qcsurgery instability report\n";
    os << "# total disconnectedness of the Julia set is not certified; the map is chosen heuristically\n";
    os << "map = " << map_label << "\n";
    os << "coefficients =";
    for (auto c : map.numerator().coeffs()) os << " " << format_complex(c / map.denominator()[0], 16);
    os << "\n";
    os << "status = " << status << "\n";
    if (!note.empty()) os << "note = " << note << "\n";
    os << "s_before = " << s_before << "\n";
    os << "postcritical_points =";
    for (auto z : p_points) os << " " << format_complex(z);
    os << "\n";
    os << "base_length = " << base_length << "\n";
    os << "length_bound = " << length_bound << "\n";
    os << "fundamental_level = " << fundamental_level << "\n";
    os << "grid = " << grid.nx << "x" << grid.ny << " [" << grid.x0 << ", " << grid.x1 << "] x [" << grid.y0 << ", "
       << grid.y1 << "]\n";
    auto list = [&](const char* key, const std::vector<double>& v) {
        os << key << " =";
        for (double x : v) os << " " << x;
        os << "\n";
    };
    list("beltrami_norms", beltrami_norms());
    list("surgery_displacements", surgery_displacements());
    for (auto& a : artifacts) os << "artifact = " << a << "\n";
    for (auto& d : depths) {
        os << "\n[depth " << d.depth << "]\n";
        os << "status = " << d.status << "\n";
        if (!d.error.empty()) os << "failed_stage = " << d.stage << "\nerror = " << d.error << "\n";
        if (d.choice.level == 0) continue;
        os << "curve_level = " << d.choice.level << "\n";
        os << "curve_covering_degree = " << d.choice.covering_degree << "\n";
        os << "curve_length = " << d.choice.curve_length << "\n";
        os << "curve_diameter = " << d.choice.curve.diameter() << "\n";
        os << "surgery_point = " << format_complex(d.choice.b) << "\n";
        os << "disk_radius = " << d.choice.radius << "\n";
        os << "ring_inner_radius = " << d.choice.p_raw << "\n";
        if (d.p == 0) continue;
        os << "p = " << d.p << "\n";
        os << "theta = " << d.theta << "\n";
        os << "target = " << format_complex(d.target) << "\n";
        os << "census_n_alpha = " << d.census_n_alpha << "\n";
        os << "census_first_safe_index = " << d.census_first_safe_index << "\n";
        os << "target_copy = " << d.target_copy << "\n";
        if (d.support_cells == 0) continue;
        os << "support_cells = " << d.support_cells << "\n";
        os << "beltrami_norm = " << d.beltrami_norm << "\n";
        os << "invariance_pass_fraction = " << d.invariance.pass_fraction() << "\n";
        os << "invariance_max_error = " << d.invariance.max_error << "\n";
        os << "surgery_displacement = " << d.surgery_displacement << "\n";
        if (d.iterations == 0) {
            for (auto& a : d.artifacts) os << "artifact = " << a << "\n";
            continue;
        }
        os << "solver_iterations = " << d.iterations << "\n";
        os << "solver_residual = " << d.solver_residual << "\n";
        os << "straightening_displacement = " << d.straightening_displacement << "\n";
        os << "fit_residual = " << d.fit_residual << "\n";
        os << "fitted_degree = " << d.fitted_degree << "\n";
        os << "fitted_coefficients =";
        for (auto c : d.fitted.numerator().coeffs()) os << " " << format_complex(c / d.fitted.denominator()[0]);
        os << "\n";
        os << "s_after = " << d.s_after << "\n";
        os << "conjugate_escape_steps =";
        for (int s : d.conjugate_escape_steps) os << " " << s;
        os << "\nfitted_escape_steps =";
        for (int s : d.fitted_escape_steps) os << " " << s;
        os << "\n";
        for (auto& a : d.artifacts) os << "artifact = " << a << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<SurgeryChoice> surgery_candidates(const RationalMap& R, const AssumptionGCertificate& cert, int level,
                                                     const std::vector<cplx>& p_points, double p_max) {
    std::vector<SurgeryChoice> out;
    for (auto& row : cert.found) {
        if (row.level != level) continue;
        for (cplx b : p_points) {
            if (!contains(row.curve, b)) continue;
            double rmax = 0.95 * row.curve.distance(b);
            SurgeryChoice best;
            for (int s = 0; s < 14; ++s) {
                double r = rmax * (1.0 - 0.05 * s);
                double pr = ring_inner_radius(R, b, r);
                if (pr <= p_max) {
                    best = {level, row.curve, row.length, row.covering_degree, b, r, pr};
                    break;
                }
            }
            if (best.level) out.push_back(best);
        }
    }
    std::sort(out.begin(), out.end(), [](const SurgeryChoice& a, const SurgeryChoice& b) { return a.radius > b.radius; });
    return out;
}

inline std::vector<int> escape_steps(const RationalMap& R, const std::vector<cplx>& starts, int horizon, double esc) {
    std::vector<int> out;
    for (cplx z : starts) {
        int n = 0;
        while (n < horizon && std::abs(z) <= esc) {
            z = R(z);
            ++n;
        }
        out.push_back(std::abs(z) > esc ? n : -1);
    }
    return out;
}

}  // namespace detail

// full = false stops each depth after the invariant structure is built and checked
inline ReportBundle run_instability_experiment(const ExperimentConfig& cfg, bool full = true) {
    ReportBundle bundle;
    MapSpec ms = parse_map(cfg.map);
    const RationalMap& R = ms.map;
    bundle.map_label = ms.label;
    bundle.map = R;
    if (!R.is_polynomial()) throw Error("invalid-argument", "the harness handles polynomial maps only");
    const double esc = polynomial_escape_radius(R);
    bundle.s_before = escape_census(R).count;

    PostcriticalSample pcs = postcritical_sample(R, 30, 1000, 1e4);
    bundle.p_points = pcs.p;

    cplx center;
    if (cfg.curve_center == "landing") {
        // without a landing point: the first postcritical point in J, else the origin
        center = ms.landing ? ms.landing->landing : pcs.p.empty() ? cplx(0) : pcs.p.front();
    } else {
        center = parse_complex(cfg.curve_center);
    }
    double radius = cfg.curve_radius;
    if (!(radius > 0)) {
        double gap = std::numeric_limits<double>::infinity();
        for (auto z : pcs.pc)
            if (std::abs(z - center) > 1e-9) gap = std::min(gap, std::abs(z - center));
        for (auto& c : critical_points(R).points) gap = std::min(gap, std::abs(c.z - center));
        radius = gap > 1e-9 && std::isfinite(gap) ? 0.5 * gap : 1.0;
    }
    bundle.base_curve = JordanCurve::circle(center, radius, cfg.curve_vertices);

    if (bundle.p_points.empty()) {
        bundle.status = "not-applicable";
        bundle.note = "postcritical set in the Julia set is empty; no curve is linked";
        return bundle;
    }
    PunctureSet punct = puncture_set(R, bundle.p_points, cfg.puncture_depth);
    bundle.base_length = quasihyperbolic_length(bundle.base_curve, punct);
    bundle.length_bound = cfg.length_bound > 0 ? cfg.length_bound : R.degree() * bundle.base_length;

    double rho = critical_green_level(R);
    bundle.fundamental_level = rho > 0 ? 1.5 * rho : std::log(2.0);
    FundamentalAnnulus fa = fundamental_annulus(R, bundle.fundamental_level, 512);

    double hw = cfg.half_width > 0 ? cfg.half_width : 1.2 * julia_half_width(R, cfg.grid_center);
    hw = std::max({hw, std::abs(cfg.grid_center) * 1.05 + 0.05, std::abs(1.0 - cfg.grid_center) * 1.05 + 0.05});
    bundle.grid = GridSpec::square(cfg.grid_center, hw, cfg.resolution);
    const int fit_degree = cfg.fit_degree > 0 ? cfg.fit_degree : R.degree();

    if (!cfg.out.empty()) std::filesystem::create_directories(cfg.out);
    if (!cfg.out.empty() && cfg.render) {
        io::write_ppm(cfg.out + "/julia.ppm", bundle.grid, escape_time_image(R, bundle.grid, cfg.horizon));
        bundle.artifacts.push_back("julia.ppm");
    }

    double prev_diam = std::numeric_limits<double>::infinity();
    bool any_applicable = false;
    int succeeded = 0;
    std::vector<int> depths = cfg.depths;
    std::sort(depths.begin(), depths.end());
    for (int depth : depths) {
        DepthReport dr;
        dr.depth = depth;
        std::string stage = "assumption_g_search";
        try {
            auto cert = assumption_g_search(R, bundle.base_curve, depth, bundle.length_bound, bundle.p_points, punct);
            bool linked = false;
            for (auto& row : cert.found) linked |= row.level == depth;
            if (!linked) {
                dr.status = "not-applicable";
                bundle.depths.push_back(std::move(dr));
                continue;
            }
            any_applicable = true;

            stage = "surgery_config";
            auto cands = detail::surgery_candidates(R, cert, depth, bundle.p_points, cfg.p_max);
            auto pick = std::find_if(cands.begin(), cands.end(),
                                     [&](const SurgeryChoice& c) { return c.curve.diameter() < prev_diam; });
            if (pick == cands.end()) throw Error("config-violation", "no linked curve carries a ring with p <= p_max");
            dr.choice = *pick;
            prev_diam = pick->curve.diameter();

            double p;
            if (cfg.p == "auto") p = std::max(cfg.p_min, std::ceil((pick->p_raw + 0.01) / cfg.p_step - 1e-9) * cfg.p_step);
            else p = std::stod(cfg.p);
            if (!(p > pick->p_raw && p <= cfg.p_max + 1e-12)) throw Error("config-violation", "p does not clear the Julia set in the disk");
            dr.p = p;
            dr.safe_radius = (1 - p) / 8;
            RadialBlendMap blend(p);
            std::optional<QuasiregularMap> P;
            for (int t = 0; t < 16 && !P; ++t) {
                double theta = 2 * pi * t / 16;
                auto sc = make_surgery_config(pick->curve, pick->b, pick->b, pick->radius, p, theta, dr.safe_radius);
                QuasiregularMap trial = build_quasiregular(R, blend, sc);
                if (target_is_safe(trial, cfg.horizon)) {
                    P = trial;
                    dr.theta = theta;
                    dr.target = sc.target;
                }
            }
            if (!P) throw Error("no-safe-copy", "no rotation puts the target on a non-returning orbit");

            stage = "intersection_census";
            auto census = intersection_census(pick->curve, fa, R, 60);
            dr.census_n_alpha = census.n_alpha;
            dr.census_first_safe_index = census.first_safe_index;
            double gt = green_function(R, dr.target);
            dr.target_copy = gt > 0 ? static_cast<int>(std::floor(std::log(gt / fa.green_level) / std::log(double(R.degree()))))
                                    : std::numeric_limits<int>::min();

            stage = "invariant_beltrami";
            BeltramiField sigma = invariant_beltrami(*P, cfg.horizon, bundle.grid);
            dr.support_cells = sigma.support_size();
            dr.beltrami_norm = sigma.sup_norm();
            dr.surgery_displacement = P->surgery().displacement();
            dr.invariance = verify_invariance(sigma, *P, cfg.invariance_samples, cfg.seed, cfg.horizon);

            if (!full) {
                if (!cfg.out.empty()) {
                    std::string name = "depth_" + std::to_string(depth) + "_sigma.bin";
                    io::write_beltrami(cfg.out + "/" + name, sigma);
                    dr.artifacts.push_back(name);
                }
                if (!cfg.out.empty() && cfg.render) {
                    std::string name = "depth_" + std::to_string(depth) + "_support.ppm";
                    io::write_ppm(cfg.out + "/" + name, bundle.grid, escape_time_image(R, bundle.grid, cfg.horizon, &sigma));
                    dr.artifacts.push_back(name);
                }
                bool ok = dr.invariance.pass_fraction() >= 0.95;
                dr.status = ok ? "built" : "invariance-violated";
                succeeded += ok;
                bundle.depths.push_back(std::move(dr));
                continue;
            }

            stage = "straighten";
            StraightenOptions so;
            so.max_iter = cfg.max_iter;
            so.tol = cfg.tol;
            RationalFit fit = straighten(*P, sigma, fit_degree, so);
            dr.iterations = fit.straightening.iterations;
            dr.solver_residual = fit.straightening.residual;
            dr.straightening_displacement = fit.straightening.sup_displacement();
            dr.fit_residual = fit.residual;
            dr.fitted = fit.fitted;
            dr.fitted_degree = fit.degree;

            stage = "escape_census";
            dr.s_after = escape_census(fit.fitted).count;
            std::vector<cplx> starts, mapped;
            for (auto& c : critical_points(R).points) {
                cplx s = P->surgery().inverse(c.z);
                starts.push_back(s);
                mapped.push_back(fit.straightening(s));
            }
            auto conj = [&](cplx z) { return P->conjugate(z); };
            for (cplx z : starts) {
                int n = 0;
                while (n < cfg.horizon && std::abs(z) <= esc) {
                    z = conj(z);
                    ++n;
                }
                dr.conjugate_escape_steps.push_back(std::abs(z) > esc ? n : -1);
            }
            // the straightening is close to an affine map far out, so the escape radius carries over
            dr.fitted_escape_steps = detail::escape_steps(fit.fitted, mapped, cfg.horizon, std::abs(fit.straightening(esc)));

            if (!cfg.out.empty()) {
                std::string base = cfg.out + "/depth_" + std::to_string(depth);
                io::write_beltrami(base + "_sigma.bin", sigma);
                dr.artifacts.push_back("depth_" + std::to_string(depth) + "_sigma.bin");
            }
            if (!cfg.out.empty() && cfg.render) {
                std::string name = "depth_" + std::to_string(depth) + "_support.ppm";
                io::write_ppm(cfg.out + "/" + name, bundle.grid, escape_time_image(R, bundle.grid, cfg.horizon, &sigma));
                dr.artifacts.push_back(name);
            }
            bool ok = dr.s_after >= bundle.s_before + 1 && dr.fit_residual < 0.05;
            dr.status = ok ? "ok" : "no-increase";
            succeeded += ok;
        } catch (const Error& e) {
            dr.status = "failed";
            dr.stage = stage;
            dr.error = e.what();
        }
        bundle.depths.push_back(std::move(dr));
    }
    int applicable = 0;
    for (auto& d : bundle.depths) applicable += d.status != "not-applicable";
    if (!any_applicable) {
        bundle.status = "not-applicable";
        bundle.note = "no pullback of the base curve is linked with the postcritical set";
    } else if (succeeded == applicable) {
        bundle.status = "success";
    } else if (succeeded > 0) {
        bundle.status = "partial";
    } else {
        bundle.status = "failed";
    }
    if (!cfg.out.empty()) {
        std::ofstream(cfg.out + "/report.txt") << bundle.text();
        bundle.artifacts.push_back("report.txt");
    }
    return bundle;
}

}  // namespace qcs
