#include "hypmix/cli.hpp"

#include "hypmix/assumptions.hpp"
#include "hypmix/config.hpp"
#include "hypmix/csv.hpp"
#include "hypmix/flow.hpp"
#include "hypmix/measure.hpp"
#include "hypmix/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace hypmix {

namespace {

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

std::string yes_no(bool b) { return b ? "pass" : "fail"; }

// Options every subcommand accepts; they override the config file.
struct Common {
    std::string config_path;
    std::string family;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* sub, Common& c, bool with_seed) {
    sub->add_option("--config", c.config_path, "INI-style run configuration")->check(CLI::ExistingFile);
    sub->add_option("--family", c.family, "built-in family name (modular) or 'config' for the [family] section")
        ->check(CLI::IsMember({"modular", "config"}));
    sub->add_option("--threads", c.threads, "worker threads (default: HYPMIX_THREADS, else all cores)")
        ->check(CLI::Range(1u, 4096u));
    if (with_seed) sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--out", c.out, "CSV output path");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    if (c.family == "modular") cfg.family = FamilySection{};
    if (c.threads) cfg.run.threads = *c.threads;
    if (c.seed) cfg.run.seed = *c.seed;
    return cfg;
}

void maybe_write(const std::string& path, const CsvTable& t, std::ostream& out) {
    if (path.empty()) return;
    write_csv(path, t);
    out << "wrote " << path << "\n";
}

// ---------------------------------------------------------------- subcommands

struct CheckArgs {
    std::size_t grid = 10000;
    double eps = 1e-8;
    long n_max = 1000;
};

int run_check(const RunConfig& cfg, const CheckArgs& a, const std::string& out_path, std::ostream& out) {
    const auto fam = cfg.make_family();
    const auto rep = check_assumptions(fam, GridSpec{a.grid, a.eps}, a.n_max);
    CsvTable t{{"assumption", "verdict", "witness", "estimate", "detail"}, {}};
    out << std::left << std::setw(14) << "assumption" << std::setw(16) << "verdict" << std::setw(14) << "witness"
        << std::setw(18) << "estimate" << "detail\n";
    for (const auto& r : rep.results) {
        const std::string w = r.witness ? format_double(*r.witness) : "";
        const std::string e = r.estimate ? format_double(*r.estimate) : "";
        out << std::setw(14) << r.name << std::setw(16) << to_string(r.verdict) << std::setw(14)
            << (r.witness ? fmt(*r.witness) : "-") << std::setw(18) << (r.estimate ? fmt(*r.estimate, 10) : "-")
            << r.detail << "\n";
        t.add({r.name, to_string(r.verdict), w, e, r.detail});
    }
    out << std::right << "Adler constant estimate: " << fmt(rep.c_a_estimate, 12) << "\n";
    maybe_write(out_path, t, out);
    return rep.all_pass() ? exit_ok : exit_check_failed;
}

struct PartitionArgs {
    long long s_max = 10;
    long long q_max = 10;
};

int run_partition(const RunConfig& cfg, const PartitionArgs& a, const std::string& out_path, std::ostream& out) {
    if (a.s_max < 2 || a.q_max < 1) throw ConfigError("partition needs --s-max >= 2 and --q-max >= 1");
    const auto fam = cfg.make_family();
    CsvTable t{{"s", "q", "c", "d", "J_length", "Fhat_d1_at_d"}, {}};
    for (long long s = 2; s <= a.s_max; ++s) {
        for (long long q = 1; q <= a.q_max; ++q) {
            const BranchIndex b{s, q};
            const auto j = interval_J_exact(fam, b);
            t.add({std::to_string(s), std::to_string(q), format_rational(j.lo), format_rational(j.hi),
                   format_rational(j.hi - j.lo), format_rational(fhat_deriv_exact(fam, b, j.hi))});
        }
    }
    if (out_path.empty()) {
        out << to_csv(t);
    } else {
        maybe_write(out_path, t, out);
    }
    return exit_ok;
}

struct VerifyArgs {
    std::string uni_n;
    std::optional<std::size_t> uni_grid;
    std::optional<long long> tails_smax, tails_qmax;
    std::optional<double> sigma, y_prime;
    std::optional<std::size_t> quads;
    std::optional<long long> pairs;
};

int run_verify(RunConfig cfg, const VerifyArgs& a, const std::string& out_path, std::ostream& out) {
    auto& v = cfg.verify;
    if (!a.uni_n.empty()) v.uni_n = parse_int_list(a.uni_n, "--uni-n");
    if (a.uni_grid) v.uni_grid = *a.uni_grid;
    if (a.tails_smax) v.tails_smax = *a.tails_smax;
    if (a.tails_qmax) v.tails_qmax = *a.tails_qmax;
    if (a.sigma) v.sigma = *a.sigma;
    if (a.y_prime) v.y_prime = *a.y_prime;
    if (a.quads) v.quad_samples = *a.quads;
    if (a.pairs) v.distortion_pairs = *a.pairs;
    const auto fam = cfg.make_family();
    const double sigma = cfg.sigma(fam);
    // Validate everything cheap before the long computations start.
    if (!(sigma > 0.0 && sigma < fam.constants().sigma_limit()))
        throw ConfigError("sigma = " + fmt(sigma) + " is outside the admissible range (0, " +
                          fmt(fam.constants().sigma_limit()) + ")");
    if (v.tails_smax < 4 || v.tails_qmax < 2) throw ConfigError("tails truncation too small");
    if (!(v.y_prime > 0.0)) throw ConfigError("y_prime must be positive");
    if (v.uni_grid < 2) throw ConfigError("UNI grid needs at least 2 points");

    CsvTable t{{"check", "quantity", "value", "reference", "verdict"}, {}};
    bool all = true;
    auto row = [&](const std::string& check, const std::string& q, double value, const std::string& ref, bool pass) {
        all = all && pass;
        t.add({check, q, format_double(value), ref, yes_no(pass)});
        out << std::left << std::setw(14) << check << std::setw(26) << q << std::setw(16) << fmt(value, 8)
            << std::setw(24) << ref << yes_no(pass) << std::right << "\n";
    };

    for (const auto& u : uni_check(fam, v.uni_n, v.uni_grid)) {
        row("uni", "inf_dpsi n=" + std::to_string(u.n), u.inf_dpsi, ">= " + fmt(u.c_u_reference), u.pass);
        if (u.sign_witness) row("uni", "summand_sign n=" + std::to_string(u.n), *u.sign_witness, "> 0", false);
    }

    const auto tails = tails_partial(fam, sigma, v.tails_smax, v.tails_qmax, v.y_prime, cfg.thread_count());
    row("tails", "partial_sum", tails.partial_sum, "finite", std::isfinite(tails.partial_sum));
    row("tails", "half_sum", tails.half_sum, "-", true);
    row("tails", "cauchy_increment", tails.cauchy_increment, "< 0.01", tails.cauchy_pass);
    row("tails", "tail_estimate", tails.tail_estimate, "-", true);
    row("tails", "majorant_sum", tails.majorant_sum, "<= " + fmt(tails.omega_majorant),
        tails.majorant_sum <= tails.omega_majorant * (1.0 + 1e-12));
    row("tails", "comparability_violations", static_cast<double>(tails.comparability_violations), "0",
        tails.comparability_violations == 0);

    const auto om = ordineminore_check(fam, v.bound_max, v.bound_max);
    row("branch_bound", "violations", static_cast<double>(om.violations), "0", om.violations == 0);
    row("branch_bound", "max_ratio", om.max_ratio, "< 1", om.max_ratio < 1.0);

    const auto quads = sample_quads(v.quad_samples, cfg.run.seed);
    const auto od = ordini_check(fam, quads, v.y_prime);
    row("comparability", "pt1_min", od.pt1_min, "finite > 0", od.pt1_min > 0.0);
    row("comparability", "pt1_max", od.pt1_max, "<= " + fmt(od.pt1_upper_reference), od.pt1_violations == 0);
    row("comparability", "pt2_min", od.pt2_min, "finite > 0", od.pt2_min > 0.0);
    row("comparability", "pt2_max", od.pt2_max, "<= " + fmt(od.pt2_upper_reference), od.pt2_violations == 0);

    const auto dist = distortion_check(fam, v.distortion_pairs, cfg.run.seed);
    row("distortion", "hat_max_constant", dist.hat.max_constant, "<= " + fmt(dist.hat.reference),
        dist.hat.violations == 0 && dist.hat.exp_violations == 0);
    row("distortion", "tilde_max_constant", dist.tilde.max_constant, "<= " + fmt(dist.tilde.reference),
        dist.tilde.violations == 0 && dist.tilde.exp_violations == 0);

    maybe_write(out_path, t, out);
    out << (all ? "all checks pass" : "some checks FAILED") << "\n";
    return all ? exit_ok : exit_check_failed;
}

struct CohomologyArgs {
    std::optional<int> n, points;
};

int run_cohomology(RunConfig cfg, const CohomologyArgs& a, const std::string& out_path, std::ostream& out) {
    if (a.n) cfg.verify.truncation_N = *a.n;
    if (a.points) cfg.verify.cohomology_points = *a.points;
    const auto rc = cfg.roof_config();
    rc.validate();
    if (cfg.verify.cohomology_points < 1) throw ConfigError("--points must be positive");
    const auto fam = cfg.make_family();
    const DensitySpec spec(fam);
    RngStream rng(cfg.run.seed, 0);
    CsvTable t{{"x", "y", "residual", "literal_residual", "tail_bound"}, {}};
    int bad = 0, produced = 0;
    long attempts = 0;
    double worst = 0.0;
    while (produced < cfg.verify.cohomology_points) {
        if (++attempts > 100L * cfg.verify.cohomology_points + 1000) throw BudgetError("too many unsuitable points");
        const PlanePoint p = sample_nu(spec, rng);
        CohomologyResidual r{};
        try {
            r = cohomology_residual(fam, rc, p);
        } catch (const UnsuitablePointError&) {
            continue;
        } catch (const BoundaryError&) {
            continue;
        }
        ++produced;
        worst = std::max(worst, std::abs(r.residual));
        if (std::abs(r.residual) > 2.0 * r.tail_bound) ++bad;
        t.add({format_double(p.x), format_double(p.y), format_double(r.residual), format_double(r.literal),
               format_double(r.tail_bound)});
        out << "x=" << fmt(p.x, 10) << " y=" << fmt(p.y, 10) << " residual=" << fmt(r.residual, 3)
            << " tail_bound=" << fmt(r.tail_bound, 3) << "\n";
    }
    out << "N=" << rc.truncation_N << " points=" << produced << " max_residual=" << fmt(worst, 3)
        << " certified_tail_bound=" << fmt(bowen_tail_bound(fam, rc.truncation_N), 3) << " exceeding_2x_bound=" << bad
        << "\n";
    maybe_write(out_path, t, out);
    return bad == 0 ? exit_ok : exit_check_failed;
}

struct TransferArgs {
    std::optional<long long> truncation, samples;
    std::optional<int> points;
};

int run_transfer(RunConfig cfg, const TransferArgs& a, const std::string& out_path, std::ostream& out) {
    auto& m = cfg.measure;
    if (a.truncation) m.transfer_truncation = *a.truncation;
    if (a.points) m.transfer_points = *a.points;
    if (a.samples) m.invariance_samples = *a.samples;
    if (m.transfer_truncation < 2 || m.transfer_points < 1 || m.invariance_samples < 100)
        throw ConfigError("transfer needs truncation >= 2, points >= 1, samples >= 100");
    const auto fam = cfg.make_family();
    const DensitySpec spec(fam);
    CsvTable t{{"kind", "where", "value", "reference", "verdict"}, {}};
    bool all = true;
    auto row = [&](const std::string& kind, const std::string& where, double value, const std::string& ref, bool pass) {
        all = all && pass;
        t.add({kind, where, format_double(value), ref, yes_no(pass)});
        out << std::left << std::setw(12) << kind << std::setw(34) << where << std::setw(16) << fmt(value, 8)
            << std::setw(24) << ref << yes_no(pass) << std::right << "\n";
    };
    const double left = base_left(fam);
    for (int i = 1; i <= m.transfer_points; ++i) {
        const double x = left + (1.0 - left) * i / (m.transfer_points + 1);
        const auto r = transfer_residual(fam, spec, x, m.transfer_truncation, m.transfer_truncation);
        row("transfer", "x=" + fmt(x, 6), r.residual, "< 0.001", r.residual < 1e-3);
    }
    const std::uint64_t seed = m.seed.value_or(cfg.run.seed);
    const std::vector<Rect> rects{{0.2, 0.4, 0.5, 1.5}, {0.6, 0.9, 0.2, 0.8}, {1.5, 2.5, 1.0, 2.0}};
    for (std::size_t k = 0; k < rects.size(); ++k) {
        const auto& r = rects[k];
        const auto e = invariance_mc(spec, r, m.x_window_lo, m.x_window_hi, m.invariance_samples, seed + k, 64,
                                     cfg.thread_count());
        const std::string where =
            "(" + fmt(r.x0) + "," + fmt(r.x1) + ")x(" + fmt(r.y0) + "," + fmt(r.y1) + ")";
        row("invariance", where, e.mass - e.preimage_mass, "|.| <= 3 x " + fmt(e.difference_stderr, 3), e.within(3.0));
    }
    const double q = strip_mass_quadrature(spec, left, 1.0);
    row("base_mass", "(1/2,1) x (0,inf)", q, "ln 2 +- 1e-8", std::abs(q - std::log(2.0)) <= 1e-8);
    maybe_write(out_path, t, out);
    return all ? exit_ok : exit_check_failed;
}

struct CorrelateArgs {
    std::optional<double> budget;  // accepts 1e7
    std::optional<double> t_max, t_step;
    std::string mode;
};

int run_correlate(RunConfig cfg, const CorrelateArgs& a, const std::string& out_path, std::ostream& out) {
    auto& s = cfg.simulate;
    if (a.budget) {
        if (!(*a.budget >= 2.0) || *a.budget != std::floor(*a.budget) || *a.budget > 1e13)
            throw ConfigError("--budget must be an integer >= 2");
        s.budget = static_cast<long long>(*a.budget);
    }
    if (a.t_max) s.t_max = *a.t_max;
    if (a.t_step) s.t_step = *a.t_step;
    if (a.mode == "birkhoff") s.mode = CorrelationMode::birkhoff;
    if (a.mode == "ensemble") s.mode = CorrelationMode::ensemble;
    const auto grid = s.t_grid();
    const auto fam = cfg.make_family();
    CorrelateOptions opt;
    opt.mode = s.mode;
    opt.streams = s.streams;
    opt.threads = cfg.thread_count();
    opt.roof = SigmaRConfig{s.roof, cfg.roof_config()};
    auto est = correlate(fam, s.u, s.v, grid, s.budget, cfg.run.seed, opt);
    CsvTable t{{"t", "c_hat", "stderr", "n_effective"}, {}};
    for (std::size_t k = 0; k < grid.size(); ++k)
        t.add({format_double(grid[k]), format_double(est.c_hat[k]), format_double(est.std_error[k]),
               format_double(est.n_effective[k])});
    if (out_path.empty()) out << to_csv(t);
    bool pass = false;
    try {
        const auto f = fit_decay(est);
        pass = f.delta_hat > 0.0 && f.r_squared >= 0.9 && envelope_decreasing(est, f.points);
        out << "delta_hat=" << fmt(f.delta_hat, 6) << " delta_stderr=" << fmt(f.delta_error, 3)
            << " prefactor=" << fmt(f.prefactor, 6) << " r_squared=" << fmt(f.r_squared, 6)
            << " fit_points=" << f.points << " rejected_samples=" << est.rejected << "\n";
    } catch (const InsufficientSignalError& e) {
        out << "delta_hat=nan prefactor=nan r_squared=nan rejected_samples=" << est.rejected << " (" << e.what()
            << ")\n";
    }
    maybe_write(out_path, t, out);
    return pass ? exit_ok : exit_check_failed;
}

int worst_code(int a, int b) {
    // Numeric aborts dominate usage errors, which dominate check failures.
    auto rank = [](int c) { return c == exit_numeric_abort ? 3 : c == exit_usage ? 2 : c == exit_check_failed ? 1 : 0; };
    return rank(a) >= rank(b) ? a : b;
}

template <class Fn>
int guarded(Fn&& fn, std::ostream& err) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "hypmix: configuration error: " << e.what() << "\n";
        return exit_usage;
    } catch (const BudgetError& e) {
        err << "hypmix: budget exhausted: " << e.what() << "\n";
        return exit_numeric_abort;
    } catch (const IoError& e) {
        err << "hypmix: I/O error: " << e.what() << "\n";
        return exit_numeric_abort;
    } catch (const std::exception& e) {
        err << "hypmix: numeric abort: " << e.what() << "\n";
        return exit_numeric_abort;
    }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Suspension-flow model of a non-compact hyperbolic flow: checks, verifiers and mixing experiment",
                 "hypmix"};
    app.require_subcommand(1);

    Common c_check, c_part, c_ver, c_coh, c_tr, c_corr, c_all;
    CheckArgs check_args;
    auto* check = app.add_subcommand("check", "check the structural assumptions on f0 and g0");
    add_common(check, c_check, false);
    check->add_option("--grid-size", check_args.grid)->check(CLI::Range(4, 100000000));
    check->add_option("--eps", check_args.eps)->check(CLI::Range(1e-300, 0.25));
    check->add_option("--n-max", check_args.n_max)->check(CLI::Range(2L, 100000000L));

    PartitionArgs part_args;
    auto* partition = app.add_subcommand("partition", "tabulate the induced partition with exact endpoints");
    add_common(partition, c_part, false);
    partition->add_option("--s-max", part_args.s_max)->check(CLI::Range(2LL, 100000LL));
    partition->add_option("--q-max", part_args.q_max)->check(CLI::Range(1LL, 100000LL));

    VerifyArgs ver_args;
    auto* verify = app.add_subcommand("verify", "UNI, exponential tails, comparability and distortion checks");
    add_common(verify, c_ver, true);
    verify->add_option("--uni-n", ver_args.uni_n, "comma-separated list of n");
    verify->add_option("--uni-grid", ver_args.uni_grid);
    verify->add_option("--tails-smax", ver_args.tails_smax);
    verify->add_option("--tails-qmax", ver_args.tails_qmax);
    verify->add_option("--sigma", ver_args.sigma, "tail exponent, must lie below min(sigma1, sigma2) / (2 rho0)");
    verify->add_option("--y-prime", ver_args.y_prime);
    verify->add_option("--quad-samples", ver_args.quads);
    verify->add_option("--distortion-pairs", ver_args.pairs);

    CohomologyArgs coh_args;
    auto* cohomology = app.add_subcommand("cohomology", "residuals of the transfer-function cohomology");
    add_common(cohomology, c_coh, true);
    cohomology->add_option("--n", coh_args.n, "truncation order");
    cohomology->add_option("--points", coh_args.points);

    TransferArgs tr_args;
    auto* transfer = app.add_subcommand("transfer", "invariant density: transfer residual, MC invariance, base mass");
    add_common(transfer, c_tr, true);
    transfer->add_option("--truncation", tr_args.truncation);
    transfer->add_option("--points", tr_args.points);
    transfer->add_option("--samples", tr_args.samples);

    CorrelateArgs corr_args;
    auto* corr = app.add_subcommand("correlate", "Monte Carlo correlation decay on the induced suspension");
    add_common(corr, c_corr, true);
    corr->add_option("--budget", corr_args.budget, "number of samples (1e7 notation accepted)");
    corr->add_option("--t-max", corr_args.t_max);
    corr->add_option("--t-step", corr_args.t_step);
    corr->add_option("--mode", corr_args.mode)->check(CLI::IsMember({"ensemble", "birkhoff"}));

    std::string out_dir;
    auto* all = app.add_subcommand("all", "run every subcommand, writing CSV files to --out-dir");
    add_common(all, c_all, true);
    all->add_option("--out-dir", out_dir);

    if (!args.empty() && !args.front().empty() && args.front().front() != '-') {
        const auto subs = app.get_subcommands([](CLI::App*) { return true; });
        const bool known = std::any_of(subs.begin(), subs.end(), [&](CLI::App* s) { return s->get_name() == args.front(); });
        if (!known) {
            err << "hypmix: unknown subcommand '" << args.front() << "'\n\n" << app.help();
            return exit_usage;
        }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "hypmix: " << e.what() << "\n\n" << app.help();
        return exit_usage;
    }

    if (check->parsed())
        return guarded([&] { return run_check(resolve(c_check), check_args, c_check.out, out); }, err);
    if (partition->parsed())
        return guarded([&] { return run_partition(resolve(c_part), part_args, c_part.out, out); }, err);
    if (verify->parsed()) return guarded([&] { return run_verify(resolve(c_ver), ver_args, c_ver.out, out); }, err);
    if (cohomology->parsed())
        return guarded([&] { return run_cohomology(resolve(c_coh), coh_args, c_coh.out, out); }, err);
    if (transfer->parsed()) return guarded([&] { return run_transfer(resolve(c_tr), tr_args, c_tr.out, out); }, err);
    if (corr->parsed()) return guarded([&] { return run_correlate(resolve(c_corr), corr_args, c_corr.out, out); }, err);

    // all
    return guarded(
        [&] {
            const RunConfig cfg = resolve(c_all);
            const std::filesystem::path dir = out_dir.empty() ? cfg.run.out_dir : out_dir;
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
            auto path = [&](const char* name) { return (dir / name).string(); };
            int code = exit_ok;
            auto step = [&](const char* title, auto&& fn) {
                out << "== " << title << "\n";
                code = worst_code(code, guarded(fn, err));
            };
            step("check", [&] { return run_check(cfg, {}, path("assumptions.csv"), out); });
            step("partition", [&] { return run_partition(cfg, {50, 50}, path("partitions.csv"), out); });
            step("verify", [&] { return run_verify(cfg, {}, path("report.csv"), out); });
            step("cohomology", [&] { return run_cohomology(cfg, {}, path("cohomology.csv"), out); });
            step("transfer", [&] { return run_transfer(cfg, {}, path("transfer.csv"), out); });
            step("correlate", [&] { return run_correlate(cfg, {}, path("corr.csv"), out); });
            return code;
        },
        err);
}

int dispatch(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, out, err);
}

}  // namespace hypmix
