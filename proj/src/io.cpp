#include "gam/io.hpp"

#include "gam/errors.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gam {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

namespace {
std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string doubles_bytes(const std::vector<double>& v) {
    std::string out(v.size() * sizeof(double), '\0');
    if (!v.empty()) std::memcpy(out.data(), v.data(), out.size());
    return out;
}
}  // namespace

std::string realization_csv(const Realization& real) {
    std::string out = "k,omega\n";
    for (long k = real.k_lo(); k <= real.k_hi(); ++k) out += std::to_string(k) + "," + fmt17(real.at(k)) + "\n";
    return out;
}

Realization parse_realization_csv(const std::string& text, std::uint64_t seed) {
    std::istringstream in(text);
    std::string line;
    Realization r;
    r.seed = seed;
    long first = 0, expect = 0;
    bool header = true, any = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            if (line.rfind("k,", 0) == 0) continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("realization row without a comma: " + line);
        long k = std::stol(line.substr(0, comma));
        double w = std::stod(line.substr(comma + 1));
        if (!any) {
            first = expect = k;
            any = true;
        }
        if (k != expect) throw ConfigError("realization rows must be consecutive blocks");
        ++expect;
        r.omega.push_back(w);
    }
    if (!any) throw ConfigError("empty realization");
    r.L = -first;
    if (expect != r.L) throw ConfigError("realization must cover blocks -L .. L-1");
    return r;
}

std::string trajectory_csv(const PruferTrajectory& t) {
    std::string out = "n,u,R_log2scale,phi_lifted\n";
    for (long n = t.n_first; n <= t.n_last(); ++n) {
        auto i = static_cast<std::size_t>(n - t.n_first);
        double u = std::ldexp(t.u[i], t.u_exp[i]);
        double lr = t.log_R(n) / std::log(2.0);
        out += std::to_string(n) + "," + fmt17(u) + "," + fmt17(lr) + "," + fmt17(t.phi[i]) + "\n";
    }
    return out;
}

std::string eigensystem_json(const EigenSystem& sys) {
    nlohmann::json j;
    j["first_site"] = sys.first_site;
    j["n"] = sys.n;
    j["values"] = sys.values;
    j["vectors_layout"] = "column-major float64";
    return j.dump(1);
}

std::string eigensystem_binary(const EigenSystem& sys) { return doubles_bytes(sys.vectors); }

EigenSystem eigensystem_from(const std::string& json_text, const std::string& binary) {
    auto j = nlohmann::json::parse(json_text);
    EigenSystem s;
    s.first_site = j.at("first_site").get<long>();
    s.n = j.at("n").get<std::size_t>();
    s.values = j.at("values").get<std::vector<double>>();
    if (binary.size() != s.n * s.n * sizeof(double)) throw std::runtime_error("eigenvector file has the wrong size");
    s.vectors.resize(s.n * s.n);
    std::memcpy(s.vectors.data(), binary.data(), binary.size());
    return s;
}

EigenCache::EigenCache(fs::path root) : root_(std::move(root)) {}

fs::path EigenCache::stem(const ModelConfig& config, long L, std::uint64_t seed) const {
    std::string key = sha256_hex(config.to_text()).substr(0, 16);
    return root_ / "eigen" / (key + "_L" + std::to_string(L) + "_s" + std::to_string(seed));
}

std::optional<EigenSystem> EigenCache::load(const ModelConfig& config, long L, std::uint64_t seed) const {
    auto s = stem(config, L, seed);
    fs::path js = s, bin = s;
    js += ".json";
    bin += ".bin";
    if (!fs::exists(js) || !fs::exists(bin)) return std::nullopt;
    try {
        return eigensystem_from(read_file(js), read_file(bin));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void EigenCache::store(const ModelConfig& config, long L, std::uint64_t seed, const EigenSystem& sys) const {
    auto s = stem(config, L, seed);
    fs::path js = s, bin = s;
    js += ".json";
    bin += ".bin";
    write_file_atomic(bin, eigensystem_binary(sys));
    write_file_atomic(js, eigensystem_json(sys));
}

EigenSystem EigenCache::get(const ModelConfig& config, long L, std::uint64_t seed) const {
    if (auto hit = load(config, L, seed)) return *hit;
    auto sys = eigh_tridiagonal(assemble_finite_box(config, sample_realization(config, L, seed), L));
    store(config, L, seed, sys);
    return sys;
}

std::string kernel_binary(const KernelGrid& g) { return doubles_bytes(g.G); }

std::string kernel_json(const KernelGrid& g) {
    nlohmann::json j;
    j["tag"] = to_string(g.tag);
    j["kind"] = to_string(g.kind);
    j["discretization"] = g.disc == Discretization::galerkin ? "galerkin" : "midpoint";
    j["E"] = g.E;
    j["n"] = g.n;
    j["B"] = g.B;
    j["h"] = g.h;
    j["k"] = g.k;
    j["layout"] = "row-major float64, rows index the output angle";
    return j.dump(1);
}

}  // namespace gam
