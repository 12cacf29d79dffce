// qcsurgery command line: orbit, census, lift, modulus, surgery, straighten, detect-conical, find-params, experiment
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "qcsurgery/experiment.hpp"

using namespace qcs;

namespace {

constexpr int exit_ok = 0, exit_error = 1, exit_not_applicable = 2;

struct Common {
    std::string map = "misiurewicz-cubic";
    std::string out;
    int resolution = 0;
    std::uint64_t seed = 1;
    std::string depth;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--map", c.map, "preset or coefficient list c0,c1,...,cd")->capture_default_str();
    app->add_option("--out", c.out, "output directory");
    app->add_option("--resolution", c.resolution, "grid resolution");
    app->add_option("--seed", c.seed, "random seed")->capture_default_str();
    app->add_option("--depth", c.depth, "comma separated depth list");
}

std::vector<int> depth_list(const std::string& s, std::vector<int> fallback) {
    if (s.empty()) return fallback;
    std::vector<int> v;
    for (auto& t : split(s, ',')) v.push_back(std::stoi(t));
    return v;
}

// stdout, or <out>/<name> when --out is given
struct Sink {
    std::ofstream file;
    std::ostream* os = &std::cout;
    Sink(const std::string& out, const std::string& name) {
        if (out.empty()) return;
        std::filesystem::create_directories(out);
        file.open(out + "/" + name);
        if (!file) throw Error("io-error", "cannot open " + out + "/" + name);
        os = &file;
    }
    std::ostream& operator*() { return *os; }
};

cplx default_start(const MapSpec& ms) {
    if (ms.landing) return -ms.landing->A;
    auto cs = critical_points(ms.map).points;
    return cs.empty() ? cplx(0) : cs.front().z;
}

void write_curve_csv(const std::string& path, const JordanCurve& c) {
    std::ofstream f(path);
    f << "re,im\n" << std::setprecision(17);
    for (auto z : c.vertices()) f << z.real() << "," << z.imag() << "\n";
}

int exit_for(const std::string& status) {
    if (status == "success") return exit_ok;
    if (status == "not-applicable") return exit_not_applicable;
    return exit_error;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quasiconformal surgery on polynomial dynamics"};
    app.require_subcommand(1);
    int code = exit_ok;

    // orbit
    Common orbit_c;
    std::string orbit_z;
    int orbit_n = 50;
    auto* orbit = app.add_subcommand("orbit", "forward orbit as CSV n,re,im,abs");
    add_common(orbit, orbit_c);
    orbit->add_option("--z", orbit_z, "start point (default: a critical point)");
    orbit->add_option("--horizon", orbit_n, "iterations")->capture_default_str();
    orbit->callback([&] {
        MapSpec ms = parse_map(orbit_c.map);
        cplx z = orbit_z.empty() ? default_start(ms) : parse_complex(orbit_z);
        auto rec = iterate_orbit(ms.map, z, orbit_n, polynomial_escape_radius(ms.map));
        Sink s(orbit_c.out, "orbit.csv");
        *s << "n,re,im,abs\n" << std::setprecision(17);
        for (std::size_t n = 0; n < rec.samples.size(); ++n) {
            cplx w = rec.samples[n];
            *s << n << "," << w.real() << "," << w.imag() << "," << std::abs(w) << "\n";
        }
    });

    // census
    Common census_c;
    auto* census = app.add_subcommand("census", "escape census of the critical points");
    add_common(census, census_c);
    census->callback([&] {
        MapSpec ms = parse_map(census_c.map);
        auto ec = escape_census(ms.map);
        Sink s(census_c.out, "census.txt");
        *s << std::setprecision(12) << "map = " << ms.label << "\ns = " << ec.count << "\n";
        for (auto& v : ec.verdicts)
            *s << "critical = " << format_complex(v.critical_point) << " multiplicity " << v.multiplicity
               << (v.escaped ? " escaped " : " bounded ") << v.steps << (v.cycle_detected ? " cycle" : "") << "\n";
        if (ms.landing)
            *s << "landing = " << format_complex(ms.landing->landing)
               << "\nlanding_multiplier = " << format_complex(ms.landing->multiplier) << "\n";
    });

    // lift
    Common lift_c;
    std::string lift_center;
    double lift_radius = 0;
    auto* lift = app.add_subcommand("lift", "pull a circle back under the map, level by level");
    add_common(lift, lift_c);
    lift->add_option("--center", lift_center, "circle centre (default: landing point or origin)");
    lift->add_option("--radius", lift_radius, "circle radius")->required();
    lift->callback([&] {
        MapSpec ms = parse_map(lift_c.map);
        cplx c = !lift_center.empty() ? parse_complex(lift_center) : ms.landing ? ms.landing->landing : cplx(0);
        auto depths = depth_list(lift_c.depth, {1});
        int k = *std::max_element(depths.begin(), depths.end());
        JordanCurve base = JordanCurve::circle(c, lift_radius, 256);
        auto p = postcritical_sample(ms.map, 30, 1000, 1e4).p;
        auto levels = pullback_levels(ms.map, base, k);
        Sink s(lift_c.out, "lift.csv");
        *s << "level,index,covering_degree,base_laps,vertices,diameter,linked\n" << std::setprecision(12);
        for (std::size_t l = 0; l < levels.size(); ++l)
            for (std::size_t i = 0; i < levels[l].size(); ++i) {
                auto& lr = levels[l][i];
                *s << l + 1 << "," << i << "," << lr.covering_degree << "," << lr.base_laps << "," << lr.curve.size() << ","
                   << lr.curve.diameter() << "," << (is_linked(lr.curve, p) ? 1 : 0) << "\n";
                if (!lift_c.out.empty())
                    write_curve_csv(lift_c.out + "/lift_" + std::to_string(l + 1) + "_" + std::to_string(i) + ".csv", lr.curve);
            }
    });

    // modulus
    Common mod_c;
    double mod_inner = 0.5, mod_outer = 1.0;
    std::string mod_center = "0";
    auto* mod = app.add_subcommand("modulus", "grid modulus of a round annulus against (1/2pi) log(q/p)");
    add_common(mod, mod_c);
    mod->add_option("--inner", mod_inner, "inner radius")->capture_default_str();
    mod->add_option("--outer", mod_outer, "outer radius")->capture_default_str();
    mod->add_option("--center", mod_center, "centre")->capture_default_str();
    mod->callback([&] {
        cplx c = parse_complex(mod_center);
        AnnulusRegion a(JordanCurve::circle(c, mod_outer, 1024), JordanCurve::circle(c, mod_inner, 1024));
        int res = mod_c.resolution > 0 ? mod_c.resolution : 512;
        auto m = grid_modulus(a, res);
        double exact = round_modulus(mod_inner, mod_outer);
        Sink s(mod_c.out, "modulus.txt");
        *s << std::setprecision(10) << "resolution = " << m.resolution << "\nmodulus = " << m.value
           << "\nerror_bound = " << m.error_bound << "\nround_modulus = " << exact
           << "\nrelative_error = " << std::abs(m.value - exact) / exact << "\n";
    });

    // experiment-like subcommands share the config handling
    auto make_cfg = [](const std::string& path, const Common& c, CLI::App* app, bool render) {
        ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
        if (app->count("--map")) cfg.map = c.map;
        if (!c.out.empty()) cfg.out = c.out;
        if (c.resolution > 0) cfg.resolution = c.resolution;
        if (app->count("--seed")) cfg.seed = c.seed;
        cfg.depths = depth_list(c.depth, cfg.depths);
        if (render) cfg.render = true;
        return cfg;
    };

    // surgery
    Common surg_c;
    std::string surg_cfg;
    bool surg_render = false;
    auto* surg = app.add_subcommand("surgery", "build the quasiregular map and its invariant structure per depth");
    add_common(surg, surg_c);
    surg->add_option("config", surg_cfg, "key = value config file");
    surg->add_flag("--render", surg_render, "write PPM renders (needs --out)");
    surg->callback([&] {
        auto b = run_instability_experiment(make_cfg(surg_cfg, surg_c, surg, surg_render), false);
        std::cout << b.text();
        code = exit_for(b.status);
    });

    // straighten
    Common str_c;
    std::string str_sigma;
    int str_iter = 200;
    double str_tol = 1e-8;
    auto* str = app.add_subcommand("straighten", "solve the Beltrami equation for a stored coefficient field");
    add_common(str, str_c);
    str->add_option("--sigma", str_sigma, "binary Beltrami field")->required();
    str->add_option("--max-iter", str_iter)->capture_default_str();
    str->add_option("--tol", str_tol)->capture_default_str();
    str->callback([&] {
        auto mu = io::read_beltrami(str_sigma);
        auto f = solve_mrmt(mu, str_iter, str_tol);
        std::cout << std::setprecision(10) << "grid = " << mu.spec().nx << "x" << mu.spec().ny
                  << "\nsup_norm = " << mu.sup_norm() << "\niterations = " << f.iterations << "\nresidual = " << f.residual
                  << "\nsup_displacement = " << f.sup_displacement() << "\n";
        if (!str_c.out.empty()) {
            std::filesystem::create_directories(str_c.out);
            io::write_qcmap(str_c.out + "/qcmap.bin", f);
            std::cout << "artifact = qcmap.bin\n";
        }
    });

    // detect-conical
    Common con_c;
    std::string con_z;
    double con_delta = 0;
    int con_d = 4, con_h = 20;
    auto* con = app.add_subcommand("detect-conical", "degrees of disk pullbacks along an orbit");
    add_common(con, con_c);
    con->add_option("--z", con_z, "orbit start (default: a critical point)");
    con->add_option("--delta", con_delta, "disk radius, 0 for the default")->capture_default_str();
    con->add_option("--dmax", con_d, "degree bound")->capture_default_str();
    con->add_option("--horizon", con_h, "largest k")->capture_default_str();
    con->callback([&] {
        MapSpec ms = parse_map(con_c.map);
        cplx x0 = con_z.empty() ? default_start(ms) : parse_complex(con_z);
        auto rec = iterate_orbit(ms.map, x0, con_h, polynomial_escape_radius(ms.map));
        if (rec.escaped) {
            std::cerr << "orbit of " << format_complex(x0) << " escapes; nothing to pull back\n";
            code = exit_not_applicable;
            return;
        }
        auto cert = detect_conical(ms.map, x0, con_delta, con_d, con_h);
        Sink s(con_c.out, "conical.csv");
        *s << "k,degree,good\n";
        std::set<int> good(cert.good_times.begin(), cert.good_times.end());
        for (std::size_t k = 0; k < cert.component_degrees.size(); ++k)
            *s << k << "," << cert.component_degrees[k] << "," << good.count(static_cast<int>(k)) << "\n";
        std::cerr << std::setprecision(6) << "x0 = " << format_complex(x0) << " delta = " << cert.delta
                  << " retries = " << cert.retries << " conical = " << (cert.conical() ? "yes" : "no") << "\n";
    });

    // find-params
    Common fp_c;
    int fp_k = 3, fp_seeds = 200;
    std::string fp_family = "cubic";
    auto* fp = app.add_subcommand("find-params", "parameters whose critical orbit lands on a repelling fixed point");
    add_common(fp, fp_c);
    fp->add_option("--k", fp_k, "landing step")->capture_default_str();
    fp->add_option("--seeds", fp_seeds, "Newton starts")->capture_default_str();
    fp->add_option("--family", fp_family, "cubic or quadratic")->check(CLI::IsMember({"cubic", "quadratic"}))->capture_default_str();
    fp->callback([&] {
        Sink s(fp_c.out, "params.csv");
        *s << std::setprecision(17);
        if (fp_family == "quadratic") {
            *s << "c_re,c_im\n";
            for (auto c : find_misiurewicz_quadratic(fp_k, fp_seeds, fp_c.seed)) *s << c.real() << "," << c.imag() << "\n";
            return;
        }
        auto found = find_misiurewicz_cubic(fp_k, fp_seeds, fp_c.seed);
        *s << "A,B_re,B_im,landing_re,landing_im,multiplier_abs,residual\n";
        for (auto& m : found)
            *s << m.A << "," << m.B.real() << "," << m.B.imag() << "," << m.landing.real() << "," << m.landing.imag() << ","
               << std::abs(m.multiplier) << "," << m.residual << "\n";
        if (found.empty()) code = exit_not_applicable;
    });

    // experiment
    Common exp_c;
    std::string exp_cfg;
    bool exp_render = false;
    auto* exp = app.add_subcommand("experiment", "end-to-end instability experiment");
    add_common(exp, exp_c);
    exp->add_option("config", exp_cfg, "key = value config file");
    exp->add_flag("--render", exp_render, "write PPM renders (needs --out)");
    exp->callback([&] {
        auto b = run_instability_experiment(make_cfg(exp_cfg, exp_c, exp, exp_render));
        std::cout << b.text();
        code = exit_for(b.status);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int r = app.exit(e);
        return r == 0 ? exit_ok : exit_error;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return code;
}
