// mtbounds: robust price bounds for forward-start straddles.
//
// Subcommands: check, lower, upper, hedge, sample, verify, multi, oracle,
// curves. Inputs are JSON measure files; outputs are JSON (deterministic
// 17-significant-digit floats) or CSV.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtbounds/mtbounds.hpp"

namespace {

using namespace mtbounds;

struct GlobalOpts {
    std::string out_path;     // empty = stdout
    std::string format = "json";
    std::uint64_t seed = 12345;
    double tol_mean = kMeanTol;
    double tol_convex = kConvexTol;
    double tol_quad = 1e-9;
};

void write_output(const GlobalOpts& g, const std::string& text) {
    if (g.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(g.out_path);
    if (!out) throw std::runtime_error("cannot write " + g.out_path);
    out << text;
}

// exit code 2 carries a machine-readable diagnostic
int fail_validation(const GlobalOpts& g, const std::string& condition,
                    double witness, const std::string& detail = "") {
    ordered_json j;
    j["status"] = "invalid";
    j["condition"] = condition;
    j["witness"] = witness;
    if (!detail.empty()) j["detail"] = detail;
    write_output(g, dump_deterministic(j));
    return 2;
}

ordered_json report_json(const BoundReport& rep) {
    ordered_json j;
    j["primal_price"] = rep.primal_price;
    j["dual_value"] = rep.dual_value;
    j["gap"] = rep.gap;
    j["min_lagrangian"] = rep.min_lagrangian;
    j["marginal_error"] = rep.marginal_error;
    j["kappa"] = rep.kappa;
    return j;
}

std::string csv_of_grid(const CouplingMap& map) {
    std::ostringstream csv;
    csv << "u,x,P,Q,phi,zeta,w\n";
    for (const auto& r : map.grid()) {
        csv << format_double(r.u) << ',' << format_double(r.x) << ','
            << format_double(r.P) << ',' << format_double(r.Q) << ','
            << format_double(r.phi) << ',' << format_double(r.zeta) << ','
            << format_double(r.w) << "\n";
    }
    return csv.str();
}

bool parse_grid_spec(const std::string& s, std::size_t& nx, std::size_t& ny) {
    const auto pos = s.find('x');
    if (pos == std::string::npos) return false;
    try {
        nx = std::stoul(s.substr(0, pos));
        ny = std::stoul(s.substr(pos + 1));
    } catch (...) {
        return false;
    }
    return nx >= 2 && ny >= 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust forward-start straddle price bounds"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--out", g.out_path, "Output path (default stdout)");
    app.add_option("--format", g.format, "Output format: json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--seed", g.seed, "RNG seed for sampling");
    app.add_option("--tol-mean", g.tol_mean, "Mean-equality tolerance");
    app.add_option("--tol-convex", g.tol_convex, "Convex-order tolerance");
    app.add_option("--tol-quad", g.tol_quad, "Quadrature tolerance");

    std::string mu_path, nu_path, curves_path, hedge_out;
    std::size_t sample_n = 0, oracle_n = 120, curve_grid = 200;
    std::string grid_spec = "500x500", sense = "min";
    double oracle_eps = 1e-12;
    bool sample_upper_flag = false;
    double curves_lo = 0.0, curves_hi = 0.0;
    std::vector<std::string> multi_paths;
    std::size_t lag_nx = 0, lag_ny = 0;

    auto* c_check = app.add_subcommand("check", "Validate a marginal pair");
    c_check->add_option("mu", mu_path)->required();
    c_check->add_option("nu", nu_path)->required();

    auto* c_lower = app.add_subcommand("lower", "Lower bound report");
    c_lower->add_option("mu", mu_path)->required();
    c_lower->add_option("nu", nu_path)->required();
    c_lower->add_option("--curves", curves_path, "Write u,x,P,Q,phi,zeta,w CSV");
    c_lower->add_option("--sample", sample_n, "Emit CSV sample pairs instead");
    c_lower->add_option("--grid", grid_spec, "Lagrangian grid, e.g. 500x500");

    auto* c_upper = app.add_subcommand("upper", "Upper bound report");
    c_upper->add_option("mu", mu_path)->required();
    c_upper->add_option("nu", nu_path)->required();
    c_upper->add_option("--curves", curves_path, "Write u,x,G,H CSV");

    auto* c_hedge = app.add_subcommand("hedge", "Semi-static hedge table");
    c_hedge->add_option("mu", mu_path)->required();
    c_hedge->add_option("nu", nu_path)->required();
    c_hedge->add_option("--out-csv", hedge_out, "CSV path for x,psi,delta")
        ->required();
    c_hedge->add_option("--grid", curve_grid, "Number of grid points");
    c_hedge
        ->add_option("--lagrangian-grid", [&lag_nx, &lag_ny](auto res) {
            if (res.size() != 2) return false;
            lag_nx = std::stoul(res[0]);
            lag_ny = std::stoul(res[1]);
            return lag_nx >= 2 && lag_ny >= 2;
        },
        "Also emit a min-L certificate on an NX NY grid")
        ->expected(2);

    auto* c_sample = app.add_subcommand("sample", "Sample coupled pairs");
    c_sample->add_option("mu", mu_path)->required();
    c_sample->add_option("nu", nu_path)->required();
    c_sample->add_option("--n", sample_n, "Sample size")->required();
    c_sample->add_flag("--upper", sample_upper_flag, "Sample the upper coupling");

    auto* c_verify = app.add_subcommand("verify", "Subhedge certificate");
    c_verify->add_option("mu", mu_path)->required();
    c_verify->add_option("nu", nu_path)->required();
    c_verify->add_option("--grid", grid_spec, "Grid, e.g. 500x500");

    auto* c_multi = app.add_subcommand("multi", "Multi-period lower bound");
    c_multi->add_option("marginals", multi_paths, "m0.json m1.json ...")
        ->required()
        ->expected(-2);

    auto* c_oracle = app.add_subcommand("oracle", "LP cross-check");
    c_oracle->add_option("mu", mu_path)->required();
    c_oracle->add_option("nu", nu_path)->required();
    c_oracle->add_option("--n", oracle_n, "Cells per piece (default 120)");
    c_oracle->add_option("--sense", sense, "min|max")
        ->check(CLI::IsMember({"min", "max"}));
    c_oracle->add_option("--epsilon", oracle_eps, "Martingale slack");

    auto* c_curves = app.add_subcommand("curves", "Potential curve CSV");
    c_curves->add_option("mu", mu_path)->required();
    c_curves->add_option("nu", nu_path)->required();
    c_curves->add_option("--grid", curve_grid, "Number of grid points");
    c_curves->add_option("--lo", curves_lo, "Grid lower end");
    c_curves->add_option("--hi", curves_hi, "Grid upper end");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_check->parsed()) {
            Measure mu = load_measure(mu_path);
            Measure nu = load_measure(nu_path);
            if (auto co = convex_order_leq(mu, nu, g.tol_mean, g.tol_convex);
                !co) {
                return fail_validation(g, "convex_order", co.witness,
                                       "violated_at " +
                                           format_double(co.witness));
            }
            MarginalPair pair;
            try {
                pair = decompose(mu, nu);
            } catch (const DispersionError& e) {
                return fail_validation(g, "dispersion", e.lo, e.what());
            }
            ordered_json j;
            j["status"] = "ok";
            j["kappa"] = pair.kappa;
            j["identical"] = pair.identical;
            if (!pair.identical) {
                j["E_lo"] = pair.a;
                j["E_hi"] = pair.b;
                j["gamma_a"] = pair.gamma_a;
                auto shape = Potential::normalized(pair).shape_check();
                j["shape_ok"] = shape.ok;
                auto upper = check_strengthened(pair);
                j["upper_assumption_ok"] = upper.ok;
            }
            write_output(g, dump_deterministic(j));
            return 0;
        }

        if (c_lower->parsed() || c_verify->parsed() || c_sample->parsed() ||
            c_hedge->parsed()) {
            Measure mu = load_measure(mu_path);
            Measure nu = load_measure(nu_path);
            if (auto co = convex_order_leq(mu, nu, g.tol_mean, g.tol_convex);
                !co) {
                return fail_validation(g, "convex_order", co.witness,
                                       "violated_at " +
                                           format_double(co.witness));
            }
            MarginalPair pair;
            try {
                pair = decompose(mu, nu);
            } catch (const DispersionError& e) {
                return fail_validation(g, "dispersion", e.lo, e.what());
            }

            if (c_sample->parsed() && sample_upper_flag) {
                auto chk = check_strengthened(pair);
                if (!chk.ok) {
                    return fail_validation(g, "strengthened_dispersion",
                                           chk.witness, chk.reason);
                }
                UpperCouplingMap up(std::move(pair));
                std::ostringstream csv;
                csv << "x,y\n";
                for (auto [x, y] : up.sample(g.seed, sample_n)) {
                    csv << format_double(x) << ',' << format_double(y) << "\n";
                }
                write_output(g, csv.str());
                return 0;
            }

            CouplingMap map(std::move(pair));

            if (c_sample->parsed()) {
                std::ostringstream csv;
                csv << "x,y\n";
                for (auto [x, y] : map.sample(g.seed, sample_n)) {
                    csv << format_double(x) << ',' << format_double(y) << "\n";
                }
                write_output(g, csv.str());
                return 0;
            }
            if (c_verify->parsed()) {
                std::size_t nx = 500, ny = 500;
                if (!parse_grid_spec(grid_spec, nx, ny)) {
                    std::cerr << "bad --grid spec\n";
                    return 1;
                }
                HedgePair hedge(map);
                const auto box = verification_box(map.pair());
                const auto rep =
                    hedge.verify_subhedge(nx, ny, box.first, box.second);
                ordered_json j;
                j["min_lagrangian"] = rep.min_L;
                j["argmin_x"] = rep.argmin_x;
                j["argmin_y"] = rep.argmin_y;
                j["max_abs_support"] = rep.max_abs_support;
                j["pass"] = rep.min_L >= -1e-9 && rep.max_abs_support <= 1e-9;
                write_output(g, dump_deterministic(j));
                return 0;
            }
            if (c_hedge->parsed()) {
                HedgePair hedge(map);
                const auto box = verification_box(map.pair());
                std::ostringstream csv;
                csv << "x,psi,delta\n";
                for (std::size_t i = 0; i <= curve_grid; ++i) {
                    const double x =
                        box.first + (box.second - box.first) *
                                        static_cast<double>(i) /
                                        static_cast<double>(curve_grid);
                    csv << format_double(x) << ','
                        << format_double(hedge.psi(x)) << ','
                        << format_double(hedge.delta(x)) << "\n";
                }
                std::ofstream out(hedge_out);
                if (!out) throw std::runtime_error("cannot write " + hedge_out);
                out << csv.str();
                if (lag_nx >= 2 && lag_ny >= 2) {
                    const auto rep = hedge.verify_subhedge(
                        lag_nx, lag_ny, box.first, box.second);
                    ordered_json j;
                    j["min_lagrangian"] = rep.min_L;
                    j["max_abs_support"] = rep.max_abs_support;
                    j["pass"] =
                        rep.min_L >= -1e-9 && rep.max_abs_support <= 1e-9;
                    write_output(g, dump_deterministic(j));
                }
                return 0;
            }
            // lower
            if (!curves_path.empty()) {
                std::ofstream out(curves_path);
                if (!out) {
                    throw std::runtime_error("cannot write " + curves_path);
                }
                out << csv_of_grid(map);
            }
            if (sample_n > 0) {
                std::ostringstream csv;
                csv << "x,y\n";
                for (auto [x, y] : map.sample(g.seed, sample_n)) {
                    csv << format_double(x) << ',' << format_double(y) << "\n";
                }
                write_output(g, csv.str());
                return 0;
            }
            std::size_t nx = 256, ny = 256;
            parse_grid_spec(grid_spec, nx, ny);
            const auto rep = lower_bound_report(map, std::min(nx, ny), g.tol_quad);
            write_output(g, dump_deterministic(report_json(rep)));
            return 0;
        }

        if (c_upper->parsed()) {
            Measure mu = load_measure(mu_path);
            Measure nu = load_measure(nu_path);
            if (auto co = convex_order_leq(mu, nu, g.tol_mean, g.tol_convex);
                !co) {
                return fail_validation(g, "convex_order", co.witness);
            }
            MarginalPair pair;
            try {
                pair = decompose(mu, nu);
            } catch (const DispersionError& e) {
                return fail_validation(g, "dispersion", e.lo, e.what());
            }
            auto chk = check_strengthened(pair);
            if (!chk.ok) {
                return fail_validation(g, "strengthened_dispersion",
                                       chk.witness, chk.reason);
            }
            UpperCouplingMap up(std::move(pair));
            if (!curves_path.empty()) {
                std::ofstream out(curves_path);
                if (!out) {
                    throw std::runtime_error("cannot write " + curves_path);
                }
                out << "u,x,G,H,phi_hat,w\n";
                for (const auto& r : up.grid()) {
                    out << format_double(r.u) << ',' << format_double(r.x)
                        << ',' << format_double(r.G) << ','
                        << format_double(r.H) << ','
                        << format_double(r.phi_hat) << ','
                        << format_double(r.w) << "\n";
                }
            }
            ordered_json j;
            j["upper_price"] = up.price(g.tol_quad);
            j["jensen_bound"] = up.jensen_bound();
            j["marginal_error"] = upper_recovery_error(up);
            j["trivial_point_mass"] = up.trivial_point_mass();
            write_output(g, dump_deterministic(j));
            return 0;
        }

        if (c_multi->parsed()) {
            std::vector<Measure> ms;
            for (const auto& p : multi_paths) ms.push_back(load_measure(p));
            SequenceBound bound;
            try {
                bound = bound_sequence(ms, /*with_dual=*/true);
            } catch (const SequenceStepError& e) {
                ordered_json j;
                j["status"] = "invalid";
                j["condition"] = "step_validation";
                j["step"] = e.step;
                j["detail"] = e.what();
                write_output(g, dump_deterministic(j));
                return 2;
            }
            ordered_json j;
            j["total"] = bound.total;
            j["steps"] = ordered_json::array();
            for (const auto& s : bound.steps) {
                ordered_json sj;
                sj["step"] = s.index;
                sj["price"] = s.price;
                sj["dual"] = s.dual;
                sj["kappa"] = s.kappa;
                j["steps"].push_back(sj);
            }
            write_output(g, dump_deterministic(j));
            return 0;
        }

        if (c_oracle->parsed()) {
            Measure mu = load_measure(mu_path);
            Measure nu = load_measure(nu_path);
            DiscreteLP lp;
            lp.x = discretize(mu, oracle_n);
            lp.y = discretize(nu, oracle_n);
            lp.sense = sense == "max" ? LpSense::maximize : LpSense::minimize;
            lp.epsilon = oracle_eps;
            try {
                const auto sol = solve_lp(lp);
                ordered_json j;
                j["value"] = sol.value;
                j["epsilon"] = sol.epsilon_used;
                j["n"] = oracle_n;
                write_output(g, dump_deterministic(j));
            } catch (const LpInfeasible& e) {
                return fail_validation(g, "lp_infeasible", 0.0, e.what());
            }
            return 0;
        }

        if (c_curves->parsed()) {
            Measure mu = load_measure(mu_path);
            Measure nu = load_measure(nu_path);
            PiecewiseCurve d = call_curve(nu).axpy(-1.0, call_curve(mu));
            double lo = curves_lo, hi = curves_hi;
            if (lo == 0.0 && hi == 0.0 && !d.knots().empty()) {
                lo = d.knots().front() - 1.0;
                hi = d.knots().back() + 1.0;
            }
            std::ostringstream csv;
            csv << "x,D,D_left,D_right\n";
            for (std::size_t i = 0; i <= curve_grid; ++i) {
                const double x = lo + (hi - lo) * static_cast<double>(i) /
                                          static_cast<double>(curve_grid);
                csv << format_double(x) << ',' << format_double(d.eval(x))
                    << ',' << format_double(d.deriv_left(x)) << ','
                    << format_double(d.deriv_right(x)) << "\n";
            }
            write_output(g, csv.str());
            return 0;
        }
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        // validation failures carry the witness in the message
        ordered_json j;
        j["status"] = "invalid";
        j["condition"] = "validation";
        j["detail"] = e.what();
        write_output(g, dump_deterministic(j));
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
