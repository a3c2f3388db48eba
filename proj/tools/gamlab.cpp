#include "gam/correlator.hpp"
#include "gam/errors.hpp"
#include "gam/hamiltonian.hpp"
#include "gam/io.hpp"
#include "gam/ksoperator.hpp"
#include "gam/lyapunov.hpp"
#include "gam/model.hpp"
#include "gam/parallel.hpp"
#include "gam/prufer.hpp"
#include "gam/spectrum.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gam;

namespace {

struct Spec {
    std::string sub;
    std::string config_path;
    std::string out;
    std::uint64_t seed = 1;
    long samples = -1;
    std::string grid;
    int quad_n = 400;
    int period = 4;
    unsigned threads = 1;
    long L = -1;
    int N = -1;
    bool dump_kernels = false;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes artifacts into out/<hash>/<sub>/ and records their digests in manifest.json.
class Artifacts {
public:
    Artifacts(const Spec& spec, const json& spec_json) : spec_json_(spec_json) {
        hash_ = sha256_hex(spec_json.dump());
        fs::path root = spec.out;
        if (root.empty()) {
            const char* env = std::getenv("GAMLAB_CACHE");
            root = env && *env ? env : "out";
        }
        dir_ = root / hash_ / spec.sub;
        fs::create_directories(dir_);
    }

    const std::string& hash() const { return hash_; }
    const fs::path& dir() const { return dir_; }
    std::string csv_header() const { return std::string("# ") + kVersion + " spec " + hash_ + "\n"; }

    void write(const std::string& name, const std::string& content) {
        write_file_atomic(dir_ / name, content);
        files_[name] = sha256_hex(content);
    }
    void write_json(const std::string& name, json j) {
        j["spec_hash"] = hash_;
        j["version"] = kVersion;
        write(name, j.dump(2) + "\n");
    }
    void finish() {
        json m;
        m["version"] = kVersion;
        m["spec_hash"] = hash_;
        m["spec"] = spec_json_;
        m["files"] = files_;
        write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    json spec_json_;
    std::string hash_;
    fs::path dir_;
    json files_ = json::object();
};

ModelConfig require_config(const Spec& s) {
    if (s.config_path.empty()) throw ConfigError("--config is required for '" + s.sub + "'");
    if (!fs::exists(s.config_path)) throw ConfigError("config file not found: " + s.config_path);
    return load_config(s.config_path);
}

/// "n" (cell midpoints over sigma0) or "lo:hi:n" (endpoints included).
std::vector<double> energy_grid(const std::string& text, const ModelConfig& cfg, int default_n) {
    auto [lo, hi] = cfg.sigma0();
    int n = default_n;
    if (!text.empty()) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(p);
        try {
            if (parts.size() == 1) {
                n = std::stoi(parts[0]);
            } else if (parts.size() == 3) {
                double a = std::stod(parts[0]), b = std::stod(parts[1]);
                n = std::stoi(parts[2]);
                if (n < 2 || !(b > a)) throw ConfigError("--grid lo:hi:n needs lo < hi and n >= 2");
                std::vector<double> g;
                for (int i = 0; i < n; ++i) g.push_back(a + (b - a) * i / (n - 1));
                return g;
            } else {
                throw ConfigError("--grid takes n or lo:hi:n");
            }
        } catch (const std::logic_error&) {
            throw ConfigError("cannot parse --grid '" + text + "'");
        }
    }
    if (n < 1) throw ConfigError("--grid needs at least one point");
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * (i + 0.5) / n);
    return g;
}

json fit_json(const DecayFit& f) {
    json j;
    j["gamma"] = f.gamma;
    j["C"] = f.C;
    j["r2"] = f.r2;
    j["ci95"] = {f.ci_lo, f.ci_hi};
    j["points"] = f.points;
    j["localizing"] = f.localizing;
    return j;
}

struct DynamicalSummary {
    std::atomic<long> realizations{0}, violations{0};
    std::mutex mu;
    double worst_gap = -INFINITY;  // max over checks of amplitude - correlator
};

CorrelatorProfile correlator_run(const ModelConfig& cfg, long L, const Spec& s, DynamicalSummary& dyn) {
    auto t_grid = default_time_grid(s.seed);
    SampleOptions opt{s.samples, s.seed, s.threads};
    return rho_hat_profile(cfg, L, 0, opt, [&](std::size_t, const EigenSystem& sys) {
        auto checks = dynamical_bound_check_all(sys, 0, t_grid);
        long bad = 0;
        double gap = -INFINITY;
        for (const auto& c : checks) {
            bad += !c.holds;
            gap = std::max(gap, c.max_amplitude - c.correlator);
        }
        dyn.realizations += 1;
        dyn.violations += bad;
        std::lock_guard<std::mutex> lock(dyn.mu);
        dyn.worst_gap = std::max(dyn.worst_gap, gap);
    });
}

int run_correlator(const Spec& s, Artifacts& out) {
    auto cfg = require_config(s);
    const long L = s.L;
    DynamicalSummary dyn;
    auto prof = correlator_run(cfg, L, s, dyn);
    const long a = cfg.profile.alpha;
    std::string csv = out.csv_header() + "m,n,block_dist,rho_hat,stderr,samples\n";
    std::string dat = out.csv_header() + "# block_dist rho_hat (plot on a log scale)\n";
    for (const auto& r : prof.rows) {
        long bd = std::labs(floor_div(r.m, a) - floor_div(r.n, a));
        csv += std::to_string(r.m) + "," + std::to_string(r.n) + "," + std::to_string(bd) + "," + num(r.mean) + "," +
               num(r.stderr) + "," + std::to_string(r.samples) + "\n";
        if (r.m >= 0) dat += std::to_string(bd) + " " + num(r.mean) + "\n";
    }
    auto fit = fit_profile(prof, static_cast<int>(a));
    json j = fit_json(fit);
    j["L"] = L;
    j["samples"] = s.samples;
    j["cauchy_schwarz_excess"] = prof.worst_cauchy_schwarz;
    j["dynamical"] = {{"realizations", dyn.realizations.load()},
                      {"t_points", default_time_grid(s.seed).size()},
                      {"violations", dyn.violations.load()},
                      {"max_amplitude_minus_correlator", dyn.worst_gap}};
    out.write("correlator.csv", csv);
    out.write("decay.dat", dat);
    out.write_json("fit.json", j);
    return 0;
}

int run_lyapunov(const Spec& s, Artifacts& out) {
    auto cfg = require_config(s);
    auto grid = energy_grid(s.grid, cfg, 32);
    std::vector<LyapunovEstimate> est(grid.size());
    parallel_for(grid.size(), s.threads,
                 [&](std::size_t i) { est[i] = lyapunov_exponent(cfg, grid[i], s.samples, s.seed); });
    std::string csv = out.csv_header() + "E,L_hat,stderr,n\n";
    for (const auto& e : est) csv += num(e.E) + "," + num(e.value) + "," + num(e.stderr) + "," + std::to_string(e.steps) + "\n";
    out.write("lyapunov.csv", csv);
    return 0;
}

json furstenberg_json(const FurstenbergReport& r) {
    json j;
    j["E"] = r.E;
    j["noncompact"] = r.noncompact;
    j["witness"] = r.witness;
    j["witness_pair"] = {r.witness_i, r.witness_j};
    if (r.invariant_set) {
        json pts = json::array();
        for (const auto& p : *r.invariant_set) pts.push_back({p.x, p.y});
        j["invariant_set"] = pts;
    } else {
        j["invariant_set"] = nullptr;
    }
    j["degenerate"] = r.degenerate;
    j["inconclusive"] = r.inconclusive;
    j["classes"] = {{"elliptic", r.elliptic}, {"parabolic", r.parabolic}, {"hyperbolic", r.hyperbolic}, {"identity", r.identity}};
    return j;
}

int run_furstenberg(const Spec& s, Artifacts& out) {
    auto cfg = require_config(s);
    auto grid = energy_grid(s.grid, cfg, 16);
    auto support = cfg.law.support_sample();
    if (support.size() > 64) support.resize(64);
    auto v0 = cfg.v0.is_zero() ? std::vector<double>{} : cfg.v0.block(0, cfg.profile.alpha);
    std::vector<json> rows(grid.size());
    parallel_for(grid.size(), s.threads, [&](std::size_t i) {
        auto rep = furstenberg_check(support, grid[i], cfg.profile, v0);
        auto j = furstenberg_json(rep);
        auto ly = lyapunov_exponent(cfg, grid[i], s.samples, s.seed);
        j["lyapunov"] = {{"value", ly.value}, {"stderr", ly.stderr}, {"ci95", {ly.value - 1.96 * ly.stderr, ly.value + 1.96 * ly.stderr}}};
        rows[i] = j;
    });
    json j;
    j["support"] = support;
    j["reports"] = rows;
    out.write_json("furstenberg.json", j);
    return 0;
}

int run_exceptional(const Spec& s, Artifacts& out) {
    std::vector<int> Ns;
    if (s.N > 0)
        Ns.push_back(s.N);
    else
        for (int n = 2; n <= 12; ++n) Ns.push_back(n);
    json warm;
    auto w0 = verify_identity_power(one_step(0.0, 0.0), 2);
    auto w1 = verify_identity_power(one_step(0.0, 1.0), 3);
    warm["M0_squared_is_minus_identity"] = {{"deviation", w0.deviation}, {"holds", w0.verdict == IdentityPower::Verdict::minus_identity && w0.deviation < 1e-14}};
    warm["M1_cubed_is_identity"] = {{"deviation", w1.deviation}, {"holds", w1.verdict == IdentityPower::Verdict::plus_identity && w1.deviation < 1e-14}};
    std::vector<json> rows(Ns.size());
    const long steps = s.samples;
    parallel_for(Ns.size(), s.threads, [&](std::size_t i) {
        int N = Ns[i];
        if (N < 2) throw ConfigError("--N must be at least 2");
        json r;
        r["N"] = N;
        auto support = exceptional_support(N);
        r["support"] = support;
        double worst = 0.0;
        bool all_identity = true;
        for (double v : support) {
            auto ip = verify_identity_power(one_step(0.0, v), N);
            worst = std::max(worst, ip.deviation);
            all_identity = all_identity && ip.verdict == IdentityPower::Verdict::plus_identity;
        }
        r["generators_power_N_deviation"] = worst;
        r["generators_power_N_identity"] = all_identity && worst < 1e-12;
        ModelConfig cfg;
        int alpha = N == 2 ? 2 : N;
        cfg.profile = {alpha, std::vector<double>(static_cast<std::size_t>(alpha), 1.0)};
        cfg.law = exceptional_law(N, N == 2);
        auto ly = lyapunov_exponent(cfg, 0.0, std::max<long>(1000, steps / alpha), s.seed);
        r["alpha"] = alpha;
        r["lyapunov_E0"] = {{"value", ly.value}, {"stderr", ly.stderr}, {"steps", ly.steps}, {"below_1e-3", ly.value < 1e-3}};
        rows[i] = r;
    });
    json j;
    j["warm_up"] = warm;
    j["cases"] = rows;
    out.write_json("exceptional.json", j);
    return 0;
}

int run_spectrum(const Spec& s, Artifacts& out) {
    auto cfg = require_config(s);
    SpectrumOptions opt;
    opt.max_period = s.period;
    opt.seed = s.seed;
    if (!s.grid.empty()) {
        auto g = energy_grid(s.grid, cfg, 2);
        if (g.size() < 2) throw ConfigError("spectrum --grid needs at least two points");
        opt.e_lo = g.front();
        opt.e_hi = g.back();
        opt.step = (g.back() - g.front()) / static_cast<double>(g.size() - 1);
    }
    if (s.samples > 0) opt.word_budget = static_cast<std::size_t>(s.samples);
    auto support = cfg.law.support_sample();
    auto res = almost_sure_spectrum(cfg, support, opt);
    json j;
    json iv = json::array();
    for (const auto& p : res.sigma.parts) iv.push_back({p.a, p.b});
    j["intervals"] = iv;
    j["measure"] = res.sigma.measure();
    j["max_period"] = opt.max_period;
    j["e_range"] = {res.e_lo, res.e_hi};
    j["step"] = res.step;
    j["words_per_period"] = res.words_per_period;
    j["exhaustive"] = res.exhaustive;
    j["partial"] = res.partial;
    out.write_json("spectrum.json", j);

    PeriodicWord lo{{cfg.law.lo()}}, hi{{cfg.law.hi()}}, mix{{cfg.law.lo(), cfg.law.hi()}};
    const int pts = 2001;
    auto dlo = discriminant_curve(lo, cfg.profile, cfg.v0, res.e_lo, res.e_hi, pts);
    auto dhi = discriminant_curve(hi, cfg.profile, cfg.v0, res.e_lo, res.e_hi, pts);
    auto dmx = discriminant_curve(mix, cfg.profile, cfg.v0, res.e_lo, res.e_hi, pts);
    std::string dat = out.csv_header() + "# E D(lo) D(hi) D(lo,hi); bands where |D| <= 2\n";
    for (std::size_t i = 0; i < dlo.size(); ++i)
        dat += num(dlo[i].first) + " " + num(dlo[i].second) + " " + num(dhi[i].second) + " " + num(dmx[i].second) + "\n";
    out.write("discriminant.dat", dat);
    return 0;
}

bool single_site_free(const ModelConfig& cfg) {
    return cfg.profile.alpha == 1 && cfg.profile.f[0] == 1.0 && cfg.v0.is_zero();
}

int run_opnorm(const Spec& s, Artifacts& out) {
    auto cfg = require_config(s);
    auto grid = energy_grid(s.grid, cfg, 64);
    GridOptions opt;
    opt.n = s.quad_n;
    opt.pi_symmetry = true;
    opt.threads = s.threads;
    auto scan = contraction_scan(cfg, grid, opt);
    std::string csv = out.csv_header() + "E,norm_22,norm_11_dev,n\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        csv += num(grid[i]) + "," + num(scan.norm22[i]) + "," + num(scan.norm11_dev[i]) + "," + std::to_string(scan.n) + "\n";
    out.write("opnorm.csv", csv);

    json j;
    j["n"] = scan.n;
    j["q_hat"] = scan.q_hat;
    j["E_at_max"] = scan.E_at_max;
    j["max_adjacent_jump"] = scan.max_jump;
    j["E_at_jump"] = scan.E_at_jump;
    j["max_norm11_dev"] = *std::max_element(scan.norm11_dev.begin(), scan.norm11_dev.end());
    j["below_one_everywhere"] = scan.q_hat < 1.0;

    GridOptions full = opt;
    full.pi_symmetry = false;
    auto ctx = make_kernel_context(cfg, scan.E_at_max, 1);
    auto tt = build_kernel_grid(KernelKind::t_tilde, ctx, full);
    double norm_full = opnorm_22(tt).value;
    double norm_fold = opnorm_22(direct_sum_reduce(tt)).value;
    j["fold"] = {{"E", scan.E_at_max}, {"torus", norm_full}, {"folded", norm_fold}, {"difference", std::abs(norm_full - norm_fold)}};
    auto n12 = norm_12_bound(KernelKind::t_right, ctx, scan.n);
    j["norm_12"] = {{"E", scan.E_at_max}, {"value", n12.value}, {"C0", n12.C0}, {"below", n12.below}};
    if (single_site_free(cfg)) {
        auto t1 = t1_realline(scan.E_at_max, cfg.law, scan.n / 2, 0.0, full);
        j["t1_realline"] = {{"E", scan.E_at_max}, {"norm", t1.norm}, {"cells", t1.cells}, {"difference", std::abs(t1.norm - norm_full)}};
    } else {
        j["t1_realline"] = nullptr;
    }
    out.write_json("summary.json", j);
    if (s.dump_kernels) {
        out.write("kernel_T_tilde.bin", kernel_binary(tt));
        out.write("kernel_T_tilde.json", kernel_json(tt) + "\n");
    }
    return 0;
}

int run_prufer_verify(const Spec& s, Artifacts& out) {
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> uf(0.5, 2.0), uv(-0.5, 0.5);
    const double h = 1e-6;
    const long L = s.L > 0 ? s.L : 2;
    auto make = [&](int alpha, bool with_v0) {
        ModelConfig c;
        c.profile.alpha = alpha;
        c.profile.f.clear();
        for (int i = 0; i < alpha; ++i) c.profile.f.push_back(uf(rng));
        c.law = SingleSiteLaw::uniform(-1.0, 1.0);
        if (with_v0) {
            std::vector<double> tab(static_cast<std::size_t>(alpha + 1));
            for (auto& v : tab) v = uv(rng);
            c.v0 = Background::periodic_table(tab, -3);
        }
        return c;
    };
    auto phase_at = [](const std::vector<double>& V, int alpha, long Lb, double E, long n) {
        return prufer_forward_potential(V, alpha, Lb, E).phi_at(n);
    };
    double worst_omega = 0.0, worst_E = 0.0;
    const long instances = s.samples;
    for (long inst = 0; inst < instances; ++inst) {
        int alpha = 1 + static_cast<int>(inst % 3);
        auto c = make(alpha, (inst / 3) % 2 == 1);
        auto real = sample_realization(c, L, rng());
        const long a = alpha;
        auto V = build_potential(c, real, -a * L, a * L - 1);
        auto ev = eigenvalues_tridiagonal(V);
        double E = ev[rng() % ev.size()] + 0.05;
        auto t = prufer_forward_potential(V, alpha, L, E);
        long n = -a * L + static_cast<long>(rng() % static_cast<std::uint64_t>(2 * a * L));
        long jn = floor_div(n, a);
        long j = std::max(-L, jn - static_cast<long>(rng() % 3));
        auto shifted = [&](double sg) {
            auto W = V;
            for (long i = 0; i < a; ++i) W[static_cast<std::size_t>(a * j + i + a * L)] += sg * h * c.profile.f[static_cast<std::size_t>(i)];
            return W;
        };
        double fd = (phase_at(shifted(1), alpha, L, E, n) - phase_at(shifted(-1), alpha, L, E, n)) / (2 * h);
        double an = dphi_domega(t, c.profile, j, n);
        worst_omega = std::max(worst_omega, std::abs(an - fd) / std::abs(fd));
        double fdE = (phase_at(V, alpha, L, E + h, n) - phase_at(V, alpha, L, E - h, n)) / (2 * h);
        worst_E = std::max(worst_E, std::abs(dphi_dE(t, n) - fdE) / std::abs(fdE));
        if (inst == 0) out.write("trajectory.csv", out.csv_header() + trajectory_csv(t));
    }
    double worst_jac = 0.0;
    bool all_negative = true;
    for (int alpha : {1, 2}) {
        for (int inst = 0; inst < 20; ++inst) {
            auto c = make(alpha, inst % 2 == 1);
            auto real = sample_realization(c, 2, rng());
            std::size_t l = rng() % static_cast<std::size_t>(4 * alpha);
            double cf = jacobian_det_closed_form(c, real, 2, l);
            double fd = jacobian_det_fd(c, real, 2, l);
            all_negative = all_negative && cf < 0;
            worst_jac = std::max(worst_jac, std::abs(cf - fd) / std::abs(fd));
        }
    }
    json j;
    j["instances"] = instances;
    j["L"] = L;
    j["fd_step"] = h;
    j["dphi_domega_max_rel_error"] = worst_omega;
    j["dphi_dE_max_rel_error"] = worst_E;
    j["derivatives_pass"] = worst_omega < 1e-6 && worst_E < 1e-6;
    j["jacobian_instances"] = 40;
    j["jacobian_max_rel_error"] = worst_jac;
    j["jacobian_always_negative"] = all_negative;
    out.write_json("prufer_verify.json", j);
    return 0;
}

int run_localize(const Spec& s, Artifacts& out) {
    auto cfg = require_config(s);
    const long a = cfg.profile.alpha;
    DynamicalSummary dyn;
    auto prof = correlator_run(cfg, s.L, s, dyn);
    auto fit = fit_profile(prof, static_cast<int>(a));
    json j;
    j["correlator_fit"] = fit_json(fit);
    j["dynamical_violations"] = dyn.violations.load();
    if (cfg.law.kind != SingleSiteLaw::Kind::density) {
        j["operator"] = nullptr;
        j["note"] = "operator bounds need an absolutely continuous single-site law";
        out.write_json("localize.json", j);
        return 0;
    }
    auto grid = energy_grid(s.grid, cfg, 64);
    GridOptions opt;
    opt.n = s.quad_n;
    opt.pi_symmetry = true;
    opt.threads = s.threads;
    auto scan = contraction_scan(cfg, grid, opt);
    j["q_hat"] = scan.q_hat;
    j["gamma_from_q_hat"] = -std::log(scan.q_hat);

    const long Lc = std::min<long>(s.L, 8);
    std::vector<long> ms;
    for (long k = 0; k < Lc; ++k) ms.push_back(a * k);
    ChainOptions co;
    co.grid.n = s.quad_n;
    co.mode = BoundMode::bound;
    auto ib = integrated_correlator_bound(cfg, Lc, ms, co, 12, s.threads);
    json chain = json::array();
    bool ratios_ok = true;
    for (std::size_t k = 0; k < ms.size(); ++k) {
        json row{{"k0", k}, {"m", ms[k]}, {"bound", ib.value[k]}};
        if (k >= 2) {
            double r = ib.value[k] / ib.value[k - 1];
            row["ratio"] = r;
            ratios_ok = ratios_ok && r <= scan.q_hat + 2e-2;
        }
        chain.push_back(row);
    }
    j["chain_L"] = Lc;
    j["chain"] = chain;
    j["ratios_within_q_hat"] = ratios_ok;
    j["fit_rate_per_block"] = fit.gamma;
    out.write_json("localize.json", j);
    return 0;
}

json spec_json(const Spec& s) {
    json j;
    j["subcommand"] = s.sub;
    j["config"] = nullptr;
    if (!s.config_path.empty() && fs::exists(s.config_path)) {
        try {
            j["config"] = load_config(s.config_path).to_text();
        } catch (const ConfigError&) {
            j["config"] = read_file(s.config_path);
        }
    }
    j["seed"] = s.seed;
    j["samples"] = s.samples;
    j["grid"] = s.grid;
    j["quad_n"] = s.quad_n;
    j["period"] = s.period;
    j["L"] = s.L;
    j["N"] = s.N;
    j["dump_kernels"] = s.dump_kernels;
    return j;
}

long default_samples(const std::string& sub) {
    if (sub == "correlator" || sub == "localize") return 2000;
    if (sub == "lyapunov") return 100000;
    if (sub == "furstenberg") return 20000;
    if (sub == "exceptional") return 1000000;
    if (sub == "prufer-verify") return 100;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical experiments for random block Schrodinger operators"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Spec spec;
    const std::vector<std::pair<std::string, std::string>> subs{
        {"correlator", "eigenfunction correlator table and decay fit"},
        {"lyapunov", "Lyapunov exponent over an energy grid"},
        {"furstenberg", "hypotheses of Furstenberg's theorem over an energy grid"},
        {"exceptional", "exceptional-energy battery"},
        {"spectrum", "almost sure spectrum from periodic words"},
        {"opnorm", "contraction scan of the transfer integral operators"},
        {"prufer-verify", "phase derivative and Jacobian identities against finite differences"},
        {"localize", "correlator fit, contraction constant and operator chain"}};
    for (const auto& [name, help] : subs) {
        auto* sc = app.add_subcommand(name, help);
        sc->add_option("--config", spec.config_path, "model configuration file");
        sc->add_option("--out", spec.out, "output root (default: $GAMLAB_CACHE or ./out)");
        sc->add_option("--seed", spec.seed, "base seed");
        sc->add_option("--samples", spec.samples, "realizations, blocks or instances, by subcommand");
        sc->add_option("--grid", spec.grid, "energy grid: n (over sigma0) or lo:hi:n");
        sc->add_option("--quad-n", spec.quad_n, "cells of the angular grid")->check(CLI::PositiveNumber);
        sc->add_option("--period", spec.period, "largest word period")->check(CLI::PositiveNumber);
        sc->add_option("--threads", spec.threads, "worker threads")->check(CLI::PositiveNumber);
        sc->add_option("--L", spec.L, "box half-length in blocks");
        sc->add_option("--N", spec.N, "exceptional order");
        sc->add_flag("--dump-kernels", spec.dump_kernels, "write kernel matrices as float64");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (auto* sc : app.get_subcommands()) spec.sub = sc->get_name();
    if (spec.samples < 0) spec.samples = default_samples(spec.sub);
    if (spec.L < 0) spec.L = spec.sub == "prufer-verify" ? 2 : 30;

    std::unique_ptr<Artifacts> out;
    try {
        out = std::make_unique<Artifacts>(spec, spec_json(spec));
        int rc = 0;
        if (spec.sub == "correlator") rc = run_correlator(spec, *out);
        else if (spec.sub == "lyapunov") rc = run_lyapunov(spec, *out);
        else if (spec.sub == "furstenberg") rc = run_furstenberg(spec, *out);
        else if (spec.sub == "exceptional") rc = run_exceptional(spec, *out);
        else if (spec.sub == "spectrum") rc = run_spectrum(spec, *out);
        else if (spec.sub == "opnorm") rc = run_opnorm(spec, *out);
        else if (spec.sub == "prufer-verify") rc = run_prufer_verify(spec, *out);
        else if (spec.sub == "localize") rc = run_localize(spec, *out);
        out->finish();
        std::cout << out->dir().string() << "\n";
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        if (out) {
            json d;
            d["error"] = e.what();
            try {
                d["diagnostics"] = json::parse(e.diagnostics());
            } catch (const json::exception&) {
                d["diagnostics"] = e.diagnostics();
            }
            out->write_json("diagnostics.json", d);
            out->finish();
        }
        return 3;
    }
}
