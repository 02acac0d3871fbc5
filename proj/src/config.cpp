#include "hypmix/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hypmix {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double to_double(const std::string& s) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError("'" + t + "' is not a finite number");
    return v;
}

long long to_integer(const std::string& s) {
    const std::string t = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec == std::errc{} && ptr == t.data() + t.size()) return v;
    // Scientific notation such as 1e7 is accepted when it denotes an integer.
    const double d = to_double(t);
    if (d != std::floor(d) || std::abs(d) > 9.0e18) throw ConfigError("'" + t + "' is not an integer");
    return static_cast<long long>(d);
}

double positive(const std::string& s) {
    const double v = to_double(s);
    if (!(v > 0.0)) throw ConfigError("value must be positive");
    return v;
}

long long at_least(const std::string& s, long long lo) {
    const long long v = to_integer(s);
    if (v < lo) throw ConfigError("value must be at least " + std::to_string(lo));
    return v;
}

double open_unit(const std::string& s) {
    const double v = to_double(s);
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("value must lie in (0,1)");
    return v;
}

Bump parse_bump(const std::string& s, Space space) {
    const auto parts = split(s, ',');
    if (parts.size() != 6 && parts.size() != 7)
        throw ConfigError("bump needs xc,yc,sc,rx,ry,rs[,amplitude]");
    Bump b;
    b.xc = to_double(parts[0]);
    b.yc = to_double(parts[1]);
    b.sc = to_double(parts[2]);
    b.rx = positive(parts[3]);
    b.ry = positive(parts[4]);
    b.rs = positive(parts[5]);
    if (parts.size() == 7) b.amplitude = to_double(parts[6]);
    b.space = space;
    return b;
}

Space parse_space(const std::string& s) {
    if (s == "sigma_r") return Space::sigma_r;
    if (s == "sigma_rho") return Space::sigma_rho;
    throw ConfigError("space must be sigma_r or sigma_rho");
}

using Setter = std::function<void(const std::string&)>;
using SectionTable = std::map<std::string, Setter>;

std::map<std::string, SectionTable> make_tables(RunConfig& c, bool& family_named, bool& coeffs_given) {
    std::map<std::string, SectionTable> t;
    auto& fam = c.family;
    t["family"] = {
        {"name", [&](const std::string& v) {
             if (v != "modular") throw ConfigError("only the built-in family 'modular' is known by name");
             fam.name = v;
             family_named = true;
         }},
        {"f0_coeffs", [&](const std::string& v) {
             const auto parts = split(v, ',');
             if (parts.size() != 4) throw ConfigError("f0_coeffs needs four integers a,b,c,d");
             for (std::size_t i = 0; i < 4; ++i) fam.f0_coeffs[i] = to_integer(parts[i]);
             fam.name = "mobius";
             coeffs_given = true;
         }},
        {"rho0", [&](const std::string& v) { fam.constants.rho0 = positive(v); }},
        {"omega1", [&](const std::string& v) { fam.constants.omega1 = parse_omega(v, FamilyConstants{}.omega1); }},
        {"omega2", [&](const std::string& v) { fam.constants.omega2 = parse_omega(v, FamilyConstants{}.omega2); }},
        {"ci1", [&](const std::string& v) { fam.constants.ci1 = positive(v); }},
        {"ci2", [&](const std::string& v) { fam.constants.ci2 = positive(v); }},
        {"sigma1", [&](const std::string& v) { fam.constants.sigma1 = open_unit(v); }},
        {"sigma2", [&](const std::string& v) { fam.constants.sigma2 = open_unit(v); }},
    };
    auto& m = c.measure;
    t["measure"] = {
        {"x_window", [&](const std::string& v) {
             const auto parts = split(v, ',');
             if (parts.size() != 2) throw ConfigError("x_window needs two numbers lo,hi");
             const double lo = positive(parts[0]), hi = positive(parts[1]);
             if (!(lo < hi)) throw ConfigError("x_window needs lo < hi");
             m.x_window_lo = lo;
             m.x_window_hi = hi;
         }},
        {"rejection_cap", [&](const std::string& v) { m.rejection_cap = static_cast<long>(at_least(v, 1)); }},
        {"seed", [&](const std::string& v) { m.seed = static_cast<std::uint64_t>(at_least(v, 0)); }},
        {"invariance_samples", [&](const std::string& v) { m.invariance_samples = at_least(v, 100); }},
        {"transfer_truncation", [&](const std::string& v) { m.transfer_truncation = at_least(v, 2); }},
        {"transfer_points", [&](const std::string& v) { m.transfer_points = static_cast<int>(at_least(v, 1)); }},
    };
    auto& ver = c.verify;
    t["verify"] = {
        {"uni_n", [&](const std::string& v) { ver.uni_n = parse_int_list(v, "uni_n"); }},
        {"uni_grid", [&](const std::string& v) { ver.uni_grid = static_cast<std::size_t>(at_least(v, 2)); }},
        {"tails_smax", [&](const std::string& v) { ver.tails_smax = at_least(v, 4); }},
        {"tails_qmax", [&](const std::string& v) { ver.tails_qmax = at_least(v, 2); }},
        {"sigma", [&](const std::string& v) { ver.sigma = positive(v); }},
        {"y_prime", [&](const std::string& v) { ver.y_prime = positive(v); }},
        {"truncation_N", [&](const std::string& v) { ver.truncation_N = static_cast<int>(at_least(v, 1)); }},
        {"quad_samples", [&](const std::string& v) { ver.quad_samples = static_cast<std::size_t>(at_least(v, 1)); }},
        {"distortion_pairs", [&](const std::string& v) { ver.distortion_pairs = at_least(v, 1); }},
        {"bound_max", [&](const std::string& v) { ver.bound_max = at_least(v, 2); }},
        {"cohomology_points", [&](const std::string& v) { ver.cohomology_points = static_cast<int>(at_least(v, 1)); }},
    };
    auto& sim = c.simulate;
    t["simulate"] = {
        {"budget", [&](const std::string& v) { sim.budget = at_least(v, 2); }},
        {"t_max", [&](const std::string& v) { sim.t_max = positive(v); }},
        {"t_step", [&](const std::string& v) { sim.t_step = positive(v); }},
        {"mode", [&](const std::string& v) {
             if (v == "ensemble") sim.mode = CorrelationMode::ensemble;
             else if (v == "birkhoff") sim.mode = CorrelationMode::birkhoff;
             else throw ConfigError("mode must be ensemble or birkhoff");
         }},
        {"streams", [&](const std::string& v) { sim.streams = static_cast<std::size_t>(at_least(v, 2)); }},
        {"roof", [&](const std::string& v) {
             if (v == "birkhoff") sim.roof = InducedRoof::birkhoff;
             else if (v == "reduced") sim.roof = InducedRoof::reduced;
             else throw ConfigError("roof must be birkhoff or reduced");
         }},
        {"u", [&](const std::string& v) { sim.u = parse_bump(v, sim.u.space); }},
        {"v", [&](const std::string& v) { sim.v = parse_bump(v, sim.v.space); }},
        {"u_space", [&](const std::string& v) { sim.u.space = parse_space(v); }},
        {"v_space", [&](const std::string& v) { sim.v.space = parse_space(v); }},
    };
    auto& run = c.run;
    t["run"] = {
        {"seed", [&](const std::string& v) { run.seed = static_cast<std::uint64_t>(at_least(v, 0)); }},
        {"threads", [&](const std::string& v) {
             const long long n = at_least(v, 1);
             if (n > 4096) throw ConfigError("threads must be at most 4096");
             run.threads = static_cast<unsigned>(n);
         }},
        {"out_dir", [&](const std::string& v) {
             if (v.empty()) throw ConfigError("out_dir must not be empty");
             run.out_dir = v;
         }},
    };
    return t;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    for (const auto& p : split(text, ',')) {
        const long long v = to_integer(p);
        if (v < 1 || v > 64) throw ConfigError(what + " entries must lie in [1, 64]");
        out.push_back(static_cast<int>(v));
    }
    if (out.empty()) throw ConfigError(what + " must not be empty");
    return out;
}

// Accepted forms:
//   inverse_square                  the family default for this slot
//   inverse_square:offset:first     n -> 1/(n+offset)^2 for n >= first
//   table:first:v1,v2,...           explicit values from index first on
OmegaSequence parse_omega(const std::string& text, const OmegaSequence& fallback) {
    const auto head = text.substr(0, text.find(':'));
    if (text == "inverse_square") return fallback;
    const auto rest = text.find(':') == std::string::npos ? std::string{} : text.substr(text.find(':') + 1);
    if (head == "inverse_square") {
        const auto parts = split(rest, ':');
        if (parts.size() != 2) throw ConfigError("inverse_square needs offset:first");
        return OmegaSequence::inverse_square(static_cast<int>(to_integer(parts[0])), static_cast<long>(to_integer(parts[1])));
    }
    if (head == "table") {
        const auto colon = rest.find(':');
        if (colon == std::string::npos) throw ConfigError("table needs first:v1,v2,...");
        std::vector<double> values;
        for (const auto& p : split(rest.substr(colon + 1), ',')) values.push_back(to_double(p));
        return OmegaSequence::table(static_cast<long>(to_integer(rest.substr(0, colon))), std::move(values));
    }
    throw ConfigError("omega must be inverse_square[:offset:first] or table:first:values");
}

std::vector<double> SimulateSection::t_grid() const {
    if (!(t_step > 0.0) || !(t_max >= 0.0)) throw ConfigError("t grid needs t_step > 0 and t_max >= 0");
    const auto n = static_cast<long long>(std::floor(t_max / t_step + 1e-9));
    if (n > 100000) throw ConfigError("t grid has more than 1e5 points");
    std::vector<double> g;
    for (long long k = 0; k <= n; ++k) g.push_back(static_cast<double>(k) * t_step);
    return g;
}

MapFamily RunConfig::make_family() const {
    if (family.name == "modular") return MapFamily({1, 0, -1, 1}, family.constants, "modular");
    return MapFamily(family.f0_coeffs, family.constants, family.name);
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    RunConfig cfg;
    bool family_named = false, coeffs_given = false;
    auto tables = make_tables(cfg, family_named, coeffs_given);
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') fail("malformed section header '" + body + "'");
            section = trim(body.substr(1, body.size() - 2));
            if (!tables.count(section)) fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) fail("expected key = value, got '" + body + "'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (section.empty()) fail("key '" + key + "' appears before any section header");
        const auto& table = tables.at(section);
        const auto it = table.find(key);
        if (it == table.end()) fail("unknown key '" + key + "' in section [" + section + "]");
        try {
            it->second(value);
        } catch (const ConfigError& e) {
            fail("key '" + key + "': " + e.what());
        }
    }
    if (family_named && coeffs_given) throw ConfigError(source + ": [family] takes either name or f0_coeffs, not both");
    // Family-level constraints (coefficient shape, constant ranges) are checked by the constructor.
    try {
        (void)cfg.make_family();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": [family]: " + e.what());
    }
    if (cfg.verify.sigma) {
        const double lim = cfg.family.constants.sigma_limit();
        if (!(*cfg.verify.sigma < lim))
            throw ConfigError(source + ": [verify] sigma must be below " + std::to_string(lim));
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

}  // namespace hypmix
