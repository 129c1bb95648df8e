#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "zlsfem/benchmarks.hpp"

namespace zlsfem {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Strict parsing: exactly the BenchmarkConfig fields, unknown keys rejected.
inline BenchmarkConfig parse_benchmark_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known = {"benchmark", "scheme", "delta",          "gamma",
                                                "theta",     "max_total_dofs", "max_outer_iters",
                                                "c_f",       "out",    "seed"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config key: " + key);
    if (!j.contains("benchmark")) throw ConfigError("config is missing required key 'benchmark'");

    BenchmarkConfig cfg;
    try {
        cfg.benchmark = benchmark_from_name(j.at("benchmark").get<std::string>());
        if (j.contains("scheme")) cfg.scheme = scheme_from_name(j.at("scheme").get<std::string>());
        if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
        if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
        if (j.contains("theta")) cfg.theta = j.at("theta").get<double>();
        if (j.contains("max_total_dofs")) cfg.max_total_dofs = j.at("max_total_dofs").get<std::int64_t>();
        if (j.contains("max_outer_iters")) cfg.max_outer_iters = j.at("max_outer_iters").get<int>();
        if (j.contains("c_f")) cfg.c_f = j.at("c_f").get<double>();
        if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config value: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    try {
        cfg.params().validate();
        if (cfg.c_f && !(*cfg.c_f > 0.0)) throw std::invalid_argument("c_f must be positive");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline BenchmarkConfig parse_benchmark_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return parse_benchmark_config(j);
}

} // namespace zlsfem
