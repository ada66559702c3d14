#include "sfada/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sfada {
namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw UsageError("invalid value '" + value + "' for config key '" + key + "'");
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t idx = 0;
        const int v = std::stoi(value, &idx);
        if (idx != value.size()) bad_value(key, value);
        return v;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value);
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t idx = 0;
        const double v = std::stod(value, &idx);
        if (idx != value.size()) bad_value(key, value);
        return v;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value);
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t idx = 0;
        const uint64_t v = std::stoull(value, &idx);
        if (idx != value.size() || value.front() == '-') bad_value(key, value);
        return v;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    bad_value(key, value);
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
    std::vector<std::string> parts;
    std::string remaining = value;
    while (true) {
        const size_t comma = remaining.find(',');
        const std::string item = trim(remaining.substr(0, comma));
        if (item.empty()) throw UsageError("empty element in list for '" + key + "'");
        parts.push_back(item);
        if (comma == std::string::npos) break;
        remaining = remaining.substr(comma + 1);
    }
    return parts;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& piece) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        out += piece(values[i]);
    }
    return out;
}

}  // namespace

void apply_setting(GlobalConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "resolution")
        cfg.resolution = parse_int(key, value);
    else if (key == "pool_k")
        cfg.pool_k = parse_int(key, value);
    else if (key == "k")
        cfg.k = parse_int(key, value);
    else if (key == "budget_percent")
        cfg.budget_percent = parse_double(key, value);
    else if (key == "lr0")
        cfg.lr0 = parse_double(key, value);
    else if (key == "decay_power")
        cfg.decay_power = parse_double(key, value);
    else if (key == "source_iters")
        cfg.source_iters = parse_int(key, value);
    else if (key == "stage1_iters")
        cfg.stage1_iters = parse_int(key, value);
    else if (key == "stage3_iters")
        cfg.stage3_iters = parse_int(key, value);
    else if (key == "batch_size")
        cfg.batch_size = parse_int(key, value);
    else if (key == "val_cadence")
        cfg.val_cadence = parse_int(key, value);
    else if (key == "seed")
        cfg.seed = parse_u64(key, value);
    else if (key == "strategy")
        cfg.strategy = value;
    else if (key == "semi")
        cfg.semi = parse_bool(key, value);
    else if (key == "spacing")
        cfg.spacing = parse_double(key, value);
    else if (key == "mode") {
        if (value != "matrix" && value != "sweep" && value != "all") bad_value(key, value);
        cfg.mode = value;
    } else if (key == "n_source")
        cfg.n_source = parse_int(key, value);
    else if (key == "n_target")
        cfg.n_target = parse_int(key, value);
    else if (key == "seeds") {
        cfg.seeds.clear();
        for (const std::string& s : split_list(key, value)) cfg.seeds.push_back(parse_u64(key, s));
    } else if (key == "strategies")
        cfg.strategies = split_list(key, value);
    else if (key == "sweep_budgets") {
        cfg.sweep_budgets.clear();
        for (const std::string& s : split_list(key, value))
            cfg.sweep_budgets.push_back(parse_double(key, s));
    } else if (key == "refresh_cache")
        cfg.refresh_cache = parse_bool(key, value);
    else
        throw UsageError("unknown config key '" + key + "'");
}

void load_config_file(GlobalConfig& cfg, const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open config file " + file.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) +
                             " is not key=value: " + line);
        apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string config_text(const GlobalConfig& cfg) {
    std::ostringstream out;
    out << "resolution=" << cfg.resolution << "\n";
    out << "pool_k=" << cfg.pool_k << "\n";
    out << "k=" << cfg.k << "\n";
    out << "budget_percent=" << fmt(cfg.budget_percent) << "\n";
    out << "lr0=" << fmt(cfg.lr0) << "\n";
    out << "decay_power=" << fmt(cfg.decay_power) << "\n";
    out << "source_iters=" << cfg.source_iters << "\n";
    out << "stage1_iters=" << cfg.stage1_iters << "\n";
    out << "stage3_iters=" << cfg.stage3_iters << "\n";
    out << "batch_size=" << cfg.batch_size << "\n";
    out << "val_cadence=" << cfg.val_cadence << "\n";
    out << "seed=" << cfg.seed << "\n";
    out << "strategy=" << cfg.strategy << "\n";
    out << "semi=" << (cfg.semi ? 1 : 0) << "\n";
    out << "spacing=" << fmt(cfg.spacing) << "\n";
    out << "mode=" << cfg.mode << "\n";
    out << "n_source=" << cfg.n_source << "\n";
    out << "n_target=" << cfg.n_target << "\n";
    out << "seeds=" << join(cfg.seeds, [](uint64_t s) { return std::to_string(s); }) << "\n";
    out << "strategies=" << join(cfg.strategies, [](const std::string& s) { return s; }) << "\n";
    out << "sweep_budgets=" << join(cfg.sweep_budgets, [](double b) { return fmt(b); }) << "\n";
    out << "refresh_cache=" << (cfg.refresh_cache ? 1 : 0) << "\n";
    return out.str();
}

AdaptationConfig adaptation_config(const GlobalConfig& cfg) {
    AdaptationConfig out;
    out.strategy = cfg.strategy;
    out.budget_percent = cfg.budget_percent;
    out.k = cfg.k;
    out.pool_k = cfg.pool_k;
    out.source_iters = cfg.source_iters;
    out.stage1_iters = cfg.stage1_iters;
    out.stage3_iters = cfg.stage3_iters;
    out.batch_size = cfg.batch_size;
    out.lr0 = cfg.lr0;
    out.decay_power = cfg.decay_power;
    out.val_cadence = cfg.val_cadence;
    out.seed = cfg.seed;
    out.semi_enabled = cfg.semi;
    out.spacing = cfg.spacing;
    return out;
}

ExperimentConfig experiment_config(const GlobalConfig& cfg, const std::filesystem::path& out_dir) {
    ExperimentConfig out;
    out.base = adaptation_config(cfg);
    out.data.n_source = cfg.n_source;
    out.data.n_target = cfg.n_target;
    out.data.height = cfg.resolution;
    out.data.width = cfg.resolution;
    out.seeds = cfg.seeds;
    out.strategies = cfg.strategies;
    out.sweep_budgets = cfg.sweep_budgets;
    out.out_dir = out_dir;
    out.refresh_cache = cfg.refresh_cache;
    return out;
}

}  // namespace sfada
