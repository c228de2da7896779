#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "klpriv/errors.hpp"
#include "klpriv/version.hpp"

namespace klpriv::cli {

namespace {

const std::set<std::string> kCommands{"bound", "estimate", "mc-verify", "lazy", "sweep"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
    return parts;
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        throw ParseError("invalid value for " + key + ": '" + s + "' (expected a non-negative integer)");
    return v;
}

std::size_t parse_size(const std::string& s, const std::string& key) {
    return static_cast<std::size_t>(parse_u64(s, key));
}

std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& key) {
    std::vector<std::size_t> out;
    for (const std::string& part : split(s, ',')) out.push_back(parse_size(part, key));
    if (out.empty()) throw ParseError(key + " needs at least one value");
    return out;
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ParseError("invalid value for " + key + ": '" + s + "' (expected true or false)");
}

std::optional<double> parse_opt_double(const std::string& s, const std::string& key) {
    if (s.empty()) return std::nullopt;
    return parse_double(s, key);
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::string normalize_name(NormalizeMode m) {
    switch (m) {
        case NormalizeMode::None: return "none";
        case NormalizeMode::Cap: return "cap";
        case NormalizeMode::Exact: return "exact";
    }
    return "cap";
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

double parse_double(const std::string& s, const std::string& key) {
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    const auto [p, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        throw ParseError("invalid value for " + key + ": '" + s + "' (expected a number)");
    return v;
}

DataSpec parse_data_spec(const std::string& spec) {
    if (spec.rfind("synth:", 0) == 0) return {true, parse_size(spec.substr(6), "data"), ""};
    if (spec.rfind("csv:", 0) == 0 && spec.size() > 4) return {false, 0, spec.substr(4)};
    throw ParseError("data must be synth:<n> or csv:<path>, got '" + spec + "'");
}

std::vector<InitScheme> selected_schemes(const RunConfig& cfg) {
    if (cfg.scheme == "all") return standard_schemes();
    if (cfg.scheme.rfind("custom:", 0) == 0) {
        std::vector<double> betas;
        for (const std::string& part : split(cfg.scheme.substr(7), ',')) betas.push_back(parse_double(part, "scheme"));
        return {InitScheme::custom(std::move(betas))};
    }
    if (auto s = parse_scheme(cfg.scheme)) return {*s};
    throw ValidationError("unknown scheme '" + cfg.scheme + "'");
}

void RunConfig::validate() const {
    require(kCommands.count(command) == 1, "unknown command '" + command + "'");
    selected_schemes(*this);
    const DataSpec spec = parse_data_spec(data);
    require(!spec.synthetic || spec.n >= 1, "synthetic data needs n >= 1");
    require(!d || *d >= 1, "d must be >= 1");
    require(outputs >= 1, "outputs must be >= 1");
    require(!widths.empty() && !depths.empty(), "width and depth need at least one value");
    for (std::size_t w : widths) require(w >= 1, "widths must be >= 1");
    for (std::size_t l : depths) require(l >= 2, "depth must be >= 2");
    require(eta > 0.0 && std::isfinite(eta), "eta must be > 0");
    require(sigma2 > 0.0 && std::isfinite(sigma2), "sigma2 must be > 0");
    require(runs >= 1, "runs must be >= 1");
    require(record_every >= 1, "record_every must be >= 1");
    require(model == "dnn" || model == "linearized", "model must be dnn or linearized");
    require(!replay_sigma2 || *replay_sigma2 >= 0.0, "replay_sigma2 must be >= 0");
    require(!horizon || *horizon >= 0.0, "T must be >= 0");
    require(!c || *c >= 0.0, "c must be >= 0");
    require(!beta_smooth || *beta_smooth >= 0.0, "beta_smooth must be >= 0");
    require(!rank || *rank >= 0.0, "rank must be >= 0");
    require(eps > 0.0, "eps must be > 0");
    require(!ridge || *ridge >= 0.0, "ridge must be >= 0");

    if (command != "sweep") {
        require(depths.size() == 1, "depth takes a single value outside sweep");
        require(widths.size() == 1 || widths.size() + 1 == depths.front(),
                "width takes one value (uniform) or depth-1 hidden widths");
    }
    if (command == "estimate" || command == "lazy")
        require(scheme != "all", command + " needs a single scheme");
    if (command == "lazy") require(outputs == 1, "lazy needs outputs = 1");
    if (command == "mc-verify") require(samples >= 2, "samples must be >= 2");
    if (model == "linearized") require(command == "estimate" || command == "sweep", "model=linearized applies to estimate and sweep");
}

Entries serialize(const RunConfig& c) {
    return {
        {"command", c.command},
        {"scheme", c.scheme},
        {"d", c.d ? std::to_string(*c.d) : ""},
        {"width", join(c.widths)},
        {"depth", join(c.depths)},
        {"outputs", std::to_string(c.outputs)},
        {"eta", format_double(c.eta)},
        {"steps", std::to_string(c.steps)},
        {"sigma2", format_double(c.sigma2)},
        {"runs", std::to_string(c.runs)},
        {"seed", std::to_string(c.seed)},
        {"neighbor", to_string(c.neighbor)},
        {"kl_constant", to_string(c.kl_constant)},
        {"data", c.data},
        {"model", c.model},
        {"pool", std::to_string(c.pool)},
        {"neighbor_cap", std::to_string(c.neighbor_cap)},
        {"label_column", c.label_column},
        {"normalize", normalize_name(c.normalize)},
        {"record_every", std::to_string(c.record_every)},
        {"replay_sigma2", opt(c.replay_sigma2)},
        {"T", opt(c.horizon)},
        {"c", opt(c.c)},
        {"beta_smooth", opt(c.beta_smooth)},
        {"rank", opt(c.rank)},
        {"eps", format_double(c.eps)},
        {"samples", std::to_string(c.samples)},
        {"ridge", opt(c.ridge)},
        {"train", c.train ? "true" : "false"},
        {"empirical", c.empirical ? "true" : "false"},
    };
}

RunConfig parse_entries(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [key, raw] : kv) {
        const std::string v = trim(raw);
        if (key == "command") c.command = v;
        else if (key == "scheme") c.scheme = v;
        else if (key == "d") c.d = v.empty() ? std::nullopt : std::optional<std::size_t>(parse_size(v, key));
        else if (key == "width") c.widths = parse_size_list(v, key);
        else if (key == "depth") c.depths = parse_size_list(v, key);
        else if (key == "outputs") c.outputs = parse_size(v, key);
        else if (key == "eta") c.eta = parse_double(v, key);
        else if (key == "steps") c.steps = parse_size(v, key);
        else if (key == "sigma2") c.sigma2 = parse_double(v, key);
        else if (key == "runs") c.runs = parse_size(v, key);
        else if (key == "seed") c.seed = parse_u64(v, key);
        else if (key == "neighbor") {
            const auto n = parse_neighbor_notion(v);
            if (!n) throw ParseError("neighbor must be replace, remove or add");
            c.neighbor = *n;
        } else if (key == "kl_constant") {
            const auto k = parse_kl_convention(v);
            if (!k) throw ParseError("kl_constant must be paper or exact");
            c.kl_constant = *k;
        } else if (key == "data") c.data = v;
        else if (key == "model") c.model = v;
        else if (key == "pool") c.pool = parse_size(v, key);
        else if (key == "neighbor_cap") c.neighbor_cap = parse_size(v, key);
        else if (key == "label_column") c.label_column = v;
        else if (key == "normalize") {
            const auto m = parse_normalize_mode(v);
            if (!m) throw ParseError("normalize must be none, cap or exact");
            c.normalize = *m;
        } else if (key == "record_every") c.record_every = parse_size(v, key);
        else if (key == "replay_sigma2") c.replay_sigma2 = parse_opt_double(v, key);
        else if (key == "T") c.horizon = parse_opt_double(v, key);
        else if (key == "c") c.c = parse_opt_double(v, key);
        else if (key == "beta_smooth") c.beta_smooth = parse_opt_double(v, key);
        else if (key == "rank") c.rank = parse_opt_double(v, key);
        else if (key == "eps") c.eps = parse_double(v, key);
        else if (key == "samples") c.samples = parse_size(v, key);
        else if (key == "ridge") c.ridge = parse_opt_double(v, key);
        else if (key == "train") c.train = parse_bool(v, key);
        else if (key == "empirical") c.empirical = parse_bool(v, key);
        else throw ParseError("unknown config key '" + key + "'");
    }
    return c;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (!line.empty() && line.front() == '#') line = trim(line.substr(1));
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError("config line with empty key: '" + line + "'");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

std::string header_text(const RunConfig& cfg) {
    std::string s = std::string("# klpriv ") + kVersion + "\n";
    for (const auto& [k, v] : serialize(cfg)) s += "# " + k + "=" + v + "\n";
    return s;
}

}  // namespace klpriv::cli
