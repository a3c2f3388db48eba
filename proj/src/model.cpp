#include "gam/model.hpp"

#include "gam/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace gam {

SingleSiteLaw SingleSiteLaw::uniform(double a, double b) {
    if (!(b > a)) throw ConfigError("uniform law needs a < b");
    return piecewise({a, b}, {1.0 / (b - a)});
}

SingleSiteLaw SingleSiteLaw::piecewise(std::vector<double> breaks, std::vector<double> heights) {
    SingleSiteLaw law;
    law.kind = Kind::density;
    law.breaks = std::move(breaks);
    law.heights = std::move(heights);
    law.validate();
    return law;
}

SingleSiteLaw SingleSiteLaw::atomic(std::vector<double> points, std::vector<double> probs) {
    SingleSiteLaw law;
    law.kind = Kind::atomic;
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return points[a] < points[b]; });
    for (auto i : idx) {
        law.points.push_back(points[i]);
        law.probs.push_back(i < probs.size() ? probs[i] : 0.0);
    }
    if (probs.size() != points.size()) throw ConfigError("atomic law: points and probs differ in length");
    law.validate();
    return law;
}

SingleSiteLaw SingleSiteLaw::delta(double c) { return atomic({c}, {1.0}); }

SingleSiteLaw SingleSiteLaw::uniform_atoms(std::vector<double> points) {
    if (points.empty()) throw ConfigError("atomic law needs at least one point");
    std::vector<double> p(points.size(), 1.0 / static_cast<double>(points.size()));
    return atomic(std::move(points), std::move(p));
}

void SingleSiteLaw::validate() const {
    if (kind == Kind::density) {
        if (breaks.size() < 2 || heights.size() + 1 != breaks.size())
            throw ConfigError("density law: need n+1 breakpoints for n heights");
        double mass = 0.0;
        for (std::size_t i = 0; i < heights.size(); ++i) {
            if (!(breaks[i + 1] > breaks[i])) throw ConfigError("density law: breakpoints must increase");
            if (!(heights[i] >= 0.0) || !std::isfinite(heights[i]))
                throw ConfigError("density law: negative or non-finite density");
            mass += heights[i] * (breaks[i + 1] - breaks[i]);
        }
        if (!(mass > 0.0)) throw ConfigError("density law: zero total mass");
        if (std::abs(mass - 1.0) > 1e-9) throw ConfigError("density law: total mass is not 1");
    } else {
        if (points.empty() || probs.size() != points.size())
            throw ConfigError("atomic law: need matching non-empty points and probs");
        double total = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (!(probs[i] > 0.0)) throw ConfigError("atomic law: probabilities must be positive");
            if (!std::isfinite(points[i])) throw ConfigError("atomic law: non-finite point");
            if (i > 0 && !(points[i] > points[i - 1])) throw ConfigError("atomic law: repeated point");
            total += probs[i];
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError("atomic law: probabilities do not sum to 1");
    }
}

double SingleSiteLaw::density(double x) const {
    if (kind != Kind::density) return 0.0;
    if (x < breaks.front() || x > breaks.back()) return 0.0;
    auto it = std::upper_bound(breaks.begin(), breaks.end(), x);
    std::size_t i = static_cast<std::size_t>(it - breaks.begin());
    if (i == 0) return 0.0;
    if (i >= breaks.size()) return heights.back();  // x == last breakpoint
    return heights[i - 1];
}

double SingleSiteLaw::cdf(double x) const {
    if (kind == Kind::atomic) {
        double s = 0.0;
        for (std::size_t i = 0; i < points.size() && points[i] <= x; ++i) s += probs[i];
        return std::min(s, 1.0);
    }
    if (x <= breaks.front()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < heights.size(); ++i) {
        if (x >= breaks[i + 1]) {
            s += heights[i] * (breaks[i + 1] - breaks[i]);
        } else {
            s += heights[i] * (x - breaks[i]);
            break;
        }
    }
    return std::min(s, 1.0);
}

double SingleSiteLaw::quantile(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    if (kind == Kind::atomic) {
        double s = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            s += probs[i];
            if (u < s) return points[i];
        }
        return points.back();
    }
    double s = 0.0;
    for (std::size_t i = 0; i < heights.size(); ++i) {
        double m = heights[i] * (breaks[i + 1] - breaks[i]);
        if (m > 0.0 && u <= s + m) return breaks[i] + (u - s) / heights[i];
        s += m;
    }
    return hi();
}

double SingleSiteLaw::sup_density() const {
    if (kind != Kind::density) return std::numeric_limits<double>::infinity();
    return *std::max_element(heights.begin(), heights.end());
}

double SingleSiteLaw::lo() const {
    if (kind == Kind::atomic) return points.front();
    for (std::size_t i = 0; i < heights.size(); ++i)
        if (heights[i] > 0.0) return breaks[i];
    return breaks.front();
}

double SingleSiteLaw::hi() const {
    if (kind == Kind::atomic) return points.back();
    for (std::size_t i = heights.size(); i-- > 0;)
        if (heights[i] > 0.0) return breaks[i + 1];
    return breaks.back();
}

double SingleSiteLaw::M() const { return std::max(std::abs(lo()), std::abs(hi())); }

double SingleSiteLaw::mean() const {
    double s = 0.0;
    if (kind == Kind::atomic) {
        for (std::size_t i = 0; i < points.size(); ++i) s += probs[i] * points[i];
        return s;
    }
    for (std::size_t i = 0; i < heights.size(); ++i)
        s += heights[i] * (breaks[i + 1] * breaks[i + 1] - breaks[i] * breaks[i]) / 2.0;
    return s;
}

double SingleSiteLaw::variance() const {
    double m = mean(), s = 0.0;
    if (kind == Kind::atomic) {
        for (std::size_t i = 0; i < points.size(); ++i) s += probs[i] * (points[i] - m) * (points[i] - m);
        return s;
    }
    for (std::size_t i = 0; i < heights.size(); ++i) {
        double a = breaks[i] - m, b = breaks[i + 1] - m;
        s += heights[i] * (b * b * b - a * a * a) / 3.0;
    }
    return s;
}

std::vector<double> SingleSiteLaw::support_sample(int n) const {
    if (kind == Kind::atomic) return points;
    n = std::max(n, 16);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(quantile(static_cast<double>(i) / (n - 1)));
    out.front() = lo();
    out.back() = hi();
    // interior gaps of the density keep their edges
    for (auto [a, b] : positive_pieces()) {
        out.push_back(a);
        out.push_back(b);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::pair<double, double>> SingleSiteLaw::positive_pieces() const {
    std::vector<std::pair<double, double>> out;
    if (kind != Kind::density) return out;
    for (std::size_t i = 0; i < heights.size(); ++i) {
        if (heights[i] <= 0.0) continue;
        if (!out.empty() && out.back().second == breaks[i])
            out.back().second = breaks[i + 1];
        else
            out.emplace_back(breaks[i], breaks[i + 1]);
    }
    return out;
}

void BlockProfile::validate() const {
    if (alpha < 1) throw ConfigError("alpha must be a positive integer");
    if (static_cast<int>(f.size()) != alpha) throw ConfigError("profile f must have alpha entries");
    for (double v : f)
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError("profile entries f_i must be strictly positive");
}

double BlockProfile::f_max() const { return *std::max_element(f.begin(), f.end()); }
double BlockProfile::f_min() const { return *std::min_element(f.begin(), f.end()); }

Background Background::constant_value(double c) {
    Background b;
    b.kind = Kind::constant;
    b.c = c;
    return b;
}

Background Background::zero_extended(std::vector<double> v, long origin) {
    Background b;
    b.kind = Kind::table;
    b.values = std::move(v);
    b.origin = origin;
    return b;
}

Background Background::periodic_table(std::vector<double> v, long origin) {
    if (v.empty()) throw ConfigError("periodic background needs at least one value");
    Background b;
    b.kind = Kind::periodic;
    b.values = std::move(v);
    b.origin = origin;
    return b;
}

double Background::at(long n) const {
    switch (kind) {
        case Kind::constant: return c;
        case Kind::table: {
            long i = n - origin;
            if (i < 0 || i >= static_cast<long>(values.size())) return 0.0;
            return values[static_cast<std::size_t>(i)];
        }
        case Kind::periodic:
            return values[static_cast<std::size_t>(floor_mod(n - origin, static_cast<long>(values.size())))];
    }
    return 0.0;
}

double Background::sup_norm() const {
    if (kind == Kind::constant) return std::abs(c);
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

bool Background::is_zero() const { return sup_norm() == 0.0; }

std::vector<double> Background::block(long k, int alpha) const {
    std::vector<double> out(static_cast<std::size_t>(alpha));
    for (int i = 0; i < alpha; ++i) out[static_cast<std::size_t>(i)] = at(alpha * k + i);
    return out;
}

void ModelConfig::validate() const {
    profile.validate();
    law.validate();
    for (double v : v0.values)
        if (!std::isfinite(v)) throw ConfigError("background potential must be finite");
    if (!std::isfinite(v0.c)) throw ConfigError("background potential must be finite");
    if (M < 0.0) throw ConfigError("M must be non-negative");
    if (M > 0.0 && law.M() > M * (1.0 + 1e-12)) throw ConfigError("law support exceeds stated M");
}

double ModelConfig::support_radius() const { return M > 0.0 ? M : law.M(); }

std::pair<double, double> ModelConfig::sigma0() const {
    double w = profile.f_max() * support_radius() + 2.0 + v0.sup_norm();
    return {-w, w};
}

namespace {

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

std::vector<double> numbers(const std::string& s, const std::string& key) {
    std::istringstream is(s);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        try {
            std::size_t pos = 0;
            double v = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': cannot parse number '" + tok + "'");
        }
    }
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "alpha = " << profile.alpha << "\n";
    os << "f = " << join(profile.f) << "\n";
    if (law.kind == SingleSiteLaw::Kind::density) {
        os << "law = density\n";
        os << "breaks = " << join(law.breaks) << "\n";
        os << "heights = " << join(law.heights) << "\n";
    } else {
        os << "law = atomic\n";
        os << "points = " << join(law.points) << "\n";
        os << "probs = " << join(law.probs) << "\n";
    }
    switch (v0.kind) {
        case Background::Kind::constant: os << "v0 = constant " << v0.c << "\n"; break;
        case Background::Kind::table: os << "v0 = table " << join(v0.values) << "\n"; break;
        case Background::Kind::periodic: os << "v0 = periodic " << join(v0.values) << "\n"; break;
    }
    if (v0.origin != 0) os << "v0_origin = " << v0.origin << "\n";
    if (M > 0.0) os << "M = " << M << "\n";
    return os.str();
}

ModelConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'");
        kv[key] = val;
    }
    static const char* known[] = {"alpha", "f", "law", "breaks", "heights", "points", "probs",
                                  "v0",    "v0_origin", "M"};
    for (auto& [k, v] : kv)
        if (std::find_if(std::begin(known), std::end(known), [&](const char* s) { return k == s; }) ==
            std::end(known))
            throw ConfigError("unknown key '" + k + "'");

    ModelConfig cfg;
    if (!kv.count("alpha")) throw ConfigError("missing key 'alpha'");
    auto a = numbers(kv["alpha"], "alpha");
    if (a.size() != 1 || a[0] != std::floor(a[0]) || a[0] < 1)
        throw ConfigError("alpha must be a positive integer");
    cfg.profile.alpha = static_cast<int>(a[0]);
    cfg.profile.f = kv.count("f") ? numbers(kv["f"], "f") : std::vector<double>(cfg.profile.alpha, 1.0);
    for (double v : cfg.profile.f)
        if (!(v > 0.0)) throw ConfigError("profile entries f_i must be strictly positive (got " +
                                          std::to_string(v) + ")");

    if (!kv.count("law")) throw ConfigError("missing key 'law'");
    std::istringstream ls(kv["law"]);
    std::string kind;
    ls >> kind;
    std::string rest;
    std::getline(ls, rest);
    auto args = numbers(rest, "law");
    if (kind == "uniform") {
        if (args.size() != 2) throw ConfigError("law = uniform a b");
        cfg.law = SingleSiteLaw::uniform(args[0], args[1]);
    } else if (kind == "delta") {
        if (args.size() != 1) throw ConfigError("law = delta c");
        cfg.law = SingleSiteLaw::delta(args[0]);
    } else if (kind == "density") {
        if (!kv.count("breaks") || !kv.count("heights"))
            throw ConfigError("law = density needs 'breaks' and 'heights'");
        cfg.law = SingleSiteLaw::piecewise(numbers(kv["breaks"], "breaks"), numbers(kv["heights"], "heights"));
    } else if (kind == "atomic") {
        if (!kv.count("points")) throw ConfigError("law = atomic needs 'points'");
        auto pts = numbers(kv["points"], "points");
        if (kv.count("probs"))
            cfg.law = SingleSiteLaw::atomic(pts, numbers(kv["probs"], "probs"));
        else
            cfg.law = SingleSiteLaw::uniform_atoms(pts);
    } else {
        throw ConfigError("unknown law kind '" + kind + "'");
    }

    if (kv.count("v0")) {
        std::istringstream vs(kv["v0"]);
        std::string vk;
        vs >> vk;
        std::string vrest;
        std::getline(vs, vrest);
        auto vals = numbers(vrest, "v0");
        long origin = 0;
        if (kv.count("v0_origin")) {
            auto o = numbers(kv["v0_origin"], "v0_origin");
            if (o.size() != 1) throw ConfigError("v0_origin takes one integer");
            origin = static_cast<long>(o[0]);
        }
        if (vk == "constant") {
            if (vals.size() != 1) throw ConfigError("v0 = constant c");
            cfg.v0 = Background::constant_value(vals[0]);
        } else if (vk == "table") {
            cfg.v0 = Background::zero_extended(vals, origin);
        } else if (vk == "periodic") {
            cfg.v0 = Background::periodic_table(vals, origin);
        } else {
            throw ConfigError("unknown v0 kind '" + vk + "'");
        }
    }
    if (kv.count("M")) {
        auto m = numbers(kv["M"], "M");
        if (m.size() != 1) throw ConfigError("M takes one value");
        cfg.M = m[0];
    }
    cfg.validate();
    return cfg;
}

ModelConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

LawSampler::LawSampler(const SingleSiteLaw& law, std::uint64_t seed) : law_(&law) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      0x9e3779b9u};
    engine_.seed(seq);
}

double LawSampler::operator()() { return law_->quantile(unif_(engine_)); }

Realization sample_realization(const ModelConfig& config, long L, std::uint64_t seed) {
    if (L < 1) throw ConfigError("L must be at least 1");
    config.law.validate();
    Realization r;
    r.L = L;
    r.seed = seed;
    r.omega.resize(static_cast<std::size_t>(2 * L));
    LawSampler draw(config.law, seed);
    for (auto& w : r.omega) w = draw();
    return r;
}

std::vector<double> build_potential(const ModelConfig& config, const Realization& real, long n_lo,
                                    long n_hi) {
    const long a = config.profile.alpha;
    if (n_hi < n_lo) return {};
    if (floor_div(n_lo, a) < real.k_lo() || floor_div(n_hi, a) > real.k_hi())
        throw std::out_of_range("potential window exceeds the realization");
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(n_hi - n_lo + 1));
    for (long n = n_lo; n <= n_hi; ++n) {
        long k = floor_div(n, a);
        long i = n - a * k;
        v.push_back(config.profile.f[static_cast<std::size_t>(i)] * real.at(k) + config.v0.at(n));
    }
    return v;
}

std::vector<double> block_potential(const BlockProfile& profile, const std::vector<double>& v0_block,
                                    double lambda) {
    std::vector<double> v(static_cast<std::size_t>(profile.alpha));
    for (int i = 0; i < profile.alpha; ++i)
        v[static_cast<std::size_t>(i)] = lambda * profile.f[static_cast<std::size_t>(i)] +
                                         (v0_block.empty() ? 0.0 : v0_block[static_cast<std::size_t>(i)]);
    return v;
}

}  // namespace gam
