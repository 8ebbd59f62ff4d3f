#pragma once

#include "empowerd/common.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace empowerd {

// Experiment configuration. Defaults follow the reference hyperparameters:
// warmup 1000, batch 64, learning rates 1e-2/1e-3/1e-4 for the dynamics,
// statistics and policy networks, gamma 0.99, beta 0.1, target sync every
// 2000 updates. Replay capacity defaults to 100k at desk scale; 10^6 is the
// documented fidelity value.
struct RunConfig {
    std::string env = "keydoor";
    long total_steps = 200000;
    long warmup_steps = 1000;
    int batch_size = 64;
    int inner_loop_m = 1;
    double lr_dynamics = 1e-2;
    double lr_statistics = 1e-3;
    double lr_policy = 1e-4;
    double gamma = 0.99;
    double beta = 0.1;
    int sync_period = 2000;
    long buffer_capacity = 100000;
    double eps_start = 1.0;
    double eps_final = 0.05;
    double eps_decay_frac = 0.1;
    int encoder_dim = 64;
    int marginal_samples_k = 16;
    uint64_t seed = 1;
    std::string intrinsic_mode = "empowerment";  // or "none"
    std::string marginal_mode = "model";         // or "shuffle"
    bool ema_correction = true;
    double ema_rate = 0.01;
    double slip = 0.0;
    int max_steps = 500;
    int metrics_every = 100;
    int hidden_width = 128;

    void validate() const {
        if (total_steps < 0) throw InvalidConfigError("total_steps must be nonnegative");
        if (warmup_steps < batch_size)
            throw InvalidConfigError("warmup_steps must be >= batch_size");
        if (batch_size <= 0) throw InvalidConfigError("batch_size must be positive");
        if (inner_loop_m <= 0) throw InvalidConfigError("inner_loop_m must be positive");
        if (!(lr_dynamics > 0) || !(lr_statistics > 0) || !(lr_policy > 0))
            throw InvalidConfigError("learning rates must be positive");
        if (gamma < 0.0 || gamma > 1.0) throw InvalidConfigError("gamma must be in [0,1]");
        if (beta < 0.0) throw InvalidConfigError("beta must be nonnegative");
        if (sync_period <= 0) throw InvalidConfigError("sync_period must be positive");
        if (buffer_capacity <= 0) throw InvalidConfigError("buffer_capacity must be positive");
        if (eps_start < 0 || eps_start > 1 || eps_final < 0 || eps_final > 1)
            throw InvalidConfigError("epsilon bounds must be in [0,1]");
        if (eps_decay_frac < 0 || eps_decay_frac > 1)
            throw InvalidConfigError("eps_decay_frac must be in [0,1]");
        if (encoder_dim <= 0) throw InvalidConfigError("encoder_dim must be positive");
        if (marginal_samples_k <= 0)
            throw InvalidConfigError("marginal_samples_k must be positive");
        if (intrinsic_mode != "empowerment" && intrinsic_mode != "none")
            throw InvalidConfigError("intrinsic_mode must be 'empowerment' or 'none'");
        if (marginal_mode != "model" && marginal_mode != "shuffle")
            throw InvalidConfigError("marginal_mode must be 'model' or 'shuffle'");
        if (!(ema_rate > 0.0 && ema_rate < 1.0))
            throw InvalidConfigError("ema_rate must be in (0,1)");
        if (slip < 0.0 || slip >= 1.0) throw InvalidConfigError("slip must be in [0,1)");
        if (max_steps <= 0) throw InvalidConfigError("max_steps must be positive");
        if (metrics_every <= 0) throw InvalidConfigError("metrics_every must be positive");
        if (hidden_width <= 0) throw InvalidConfigError("hidden_width must be positive");
    }

    // Behavior epsilon at a 1-based environment step: linear decay from
    // eps_start to eps_final over the first eps_decay_frac of total_steps,
    // then constant.
    double epsilon_at(long step) const {
        const double decay_steps =
            std::max(1.0, eps_decay_frac * static_cast<double>(total_steps));
        const double progress =
            std::min(1.0, static_cast<double>(step - 1) / decay_steps);
        return eps_start + (eps_final - eps_start) * progress;
    }
};

namespace detail {

struct ConfigField {
    enum class Kind { kString, kBool, kInt, kFloat };
    Kind kind;
    std::function<void(RunConfig&, const std::string&, bool, double, long)> set;
};

inline const std::map<std::string, ConfigField>& config_schema() {
    using Kind = ConfigField::Kind;
    auto str_field = [](std::string RunConfig::*member) {
        return ConfigField{Kind::kString, [member](RunConfig& c, const std::string& s, bool,
                                                   double, long) { c.*member = s; }};
    };
    auto bool_field = [](bool RunConfig::*member) {
        return ConfigField{Kind::kBool, [member](RunConfig& c, const std::string&, bool b,
                                                 double, long) { c.*member = b; }};
    };
    auto int_field = [](auto RunConfig::*member) {
        return ConfigField{Kind::kInt,
                           [member](RunConfig& c, const std::string&, bool, double, long v) {
                               c.*member = static_cast<std::decay_t<decltype(c.*member)>>(v);
                           }};
    };
    auto float_field = [](double RunConfig::*member) {
        return ConfigField{Kind::kFloat, [member](RunConfig& c, const std::string&, bool,
                                                  double v, long) { c.*member = v; }};
    };
    static const std::map<std::string, ConfigField> schema = {
        {"env", str_field(&RunConfig::env)},
        {"total_steps", int_field(&RunConfig::total_steps)},
        {"warmup_steps", int_field(&RunConfig::warmup_steps)},
        {"batch_size", int_field(&RunConfig::batch_size)},
        {"inner_loop_m", int_field(&RunConfig::inner_loop_m)},
        {"lr_dynamics", float_field(&RunConfig::lr_dynamics)},
        {"lr_statistics", float_field(&RunConfig::lr_statistics)},
        {"lr_policy", float_field(&RunConfig::lr_policy)},
        {"gamma", float_field(&RunConfig::gamma)},
        {"beta", float_field(&RunConfig::beta)},
        {"sync_period", int_field(&RunConfig::sync_period)},
        {"buffer_capacity", int_field(&RunConfig::buffer_capacity)},
        {"eps_start", float_field(&RunConfig::eps_start)},
        {"eps_final", float_field(&RunConfig::eps_final)},
        {"eps_decay_frac", float_field(&RunConfig::eps_decay_frac)},
        {"encoder_dim", int_field(&RunConfig::encoder_dim)},
        {"marginal_samples_k", int_field(&RunConfig::marginal_samples_k)},
        {"seed", int_field(&RunConfig::seed)},
        {"intrinsic_mode", str_field(&RunConfig::intrinsic_mode)},
        {"marginal_mode", str_field(&RunConfig::marginal_mode)},
        {"ema_correction", bool_field(&RunConfig::ema_correction)},
        {"ema_rate", float_field(&RunConfig::ema_rate)},
        {"slip", float_field(&RunConfig::slip)},
        {"max_steps", int_field(&RunConfig::max_steps)},
        {"metrics_every", int_field(&RunConfig::metrics_every)},
        {"hidden_width", int_field(&RunConfig::hidden_width)},
    };
    return schema;
}

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Applies one key = value assignment. Values are a flat TOML subset: quoted
// strings, booleans, integers, floats. Unknown keys and type mismatches are
// hard errors naming the key.
inline void apply_assignment(RunConfig& config, const std::string& key,
                             const std::string& raw_value) {
    const auto& schema = config_schema();
    const auto it = schema.find(key);
    if (it == schema.end()) throw InvalidConfigError("unknown config key '" + key + "'");
    const auto& field = it->second;
    std::string value = trim(raw_value);
    if (value.empty()) throw InvalidConfigError("empty value for key '" + key + "'");

    using Kind = ConfigField::Kind;
    switch (field.kind) {
        case Kind::kString: {
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            else if (value.front() == '"' || value.back() == '"')
                throw InvalidConfigError("unterminated string for key '" + key + "'");
            field.set(config, value, false, 0.0, 0);
            return;
        }
        case Kind::kBool: {
            if (value == "true") return field.set(config, "", true, 0.0, 0);
            if (value == "false") return field.set(config, "", false, 0.0, 0);
            throw InvalidConfigError("expected true/false for key '" + key + "'");
        }
        case Kind::kInt: {
            try {
                size_t pos = 0;
                const long v = std::stol(value, &pos);
                if (pos != value.size()) throw std::invalid_argument("trailing");
                return field.set(config, "", false, 0.0, v);
            } catch (const std::exception&) {
                throw InvalidConfigError("expected an integer for key '" + key + "', got '" +
                                         value + "'");
            }
        }
        case Kind::kFloat: {
            try {
                size_t pos = 0;
                const double v = std::stod(value, &pos);
                if (pos != value.size()) throw std::invalid_argument("trailing");
                return field.set(config, "", false, v, 0);
            } catch (const std::exception&) {
                throw InvalidConfigError("expected a number for key '" + key + "', got '" +
                                         value + "'");
            }
        }
    }
}

}  // namespace detail

// Parses a flat TOML document (key = value lines, '#' comments). Nested
// tables are rejected; unknown keys are hard errors.
inline RunConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides = {}) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Strip comments outside of quotes.
        bool in_quote = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            if (line[i] == '#' && !in_quote) {
                line = line.substr(0, i);
                break;
            }
        }
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        if (stripped.front() == '[')
            throw InvalidConfigError("nested tables are not supported (line " +
                                     std::to_string(line_no) + ")");
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw InvalidConfigError("expected key = value at line " + std::to_string(line_no));
        detail::apply_assignment(config, detail::trim(stripped.substr(0, eq)),
                                 detail::trim(stripped.substr(eq + 1)));
    }
    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw InvalidConfigError("override '" + ov + "' is not key=value");
        detail::apply_assignment(config, detail::trim(ov.substr(0, eq)),
                                 detail::trim(ov.substr(eq + 1)));
    }
    config.validate();
    return config;
}

inline RunConfig parse_config(const std::string& path,
                              const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("config file not found: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), overrides);
}

}  // namespace empowerd
