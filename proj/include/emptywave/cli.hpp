#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emptywave/experiments.hpp"

namespace ew::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kSamplesEnvVar = "EMPTYWAVE_SAMPLES";

struct SweepBlock {
    std::string param;
    double from = 0.0;
    double to = 0.0;
    int steps = 0;
};

struct RunConfig {
    std::string experiment;
    std::vector<std::string> models;  // empty means all
    std::map<std::string, double> params;
    bool theta_uniform = false;
    std::optional<SweepBlock> sweep;
    int samples = 100000;
    std::uint64_t seed = 1;
    std::string out;  // empty: stdout
    std::string format = "csv";
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline std::vector<Model> resolve_models(const std::vector<std::string>& names) {
    std::vector<Model> out;
    if (names.empty()) return {Model::CI, Model::Bohm3ND, Model::DeBroglie3D};
    for (const auto& n : names) {
        if (n == "all") return {Model::CI, Model::Bohm3ND, Model::DeBroglie3D};
        auto m = model_from_name(n);
        if (!m) throw ConfigError("unknown model '" + n + "'");
        out.push_back(*m);
    }
    return out;
}

inline ExperimentSpec to_spec(const RunConfig& cfg) {
    ExperimentSpec spec;
    spec.name = cfg.experiment;
    spec.models = resolve_models(cfg.models);
    spec.n_samples = cfg.samples;
    spec.seed = cfg.seed;
    if (cfg.theta_uniform)
        spec.params.delta_theta = std::nullopt;
    else if (cfg.params.count("delta_theta"))
        spec.params.delta_theta = cfg.params.at("delta_theta");
    if (cfg.params.count("delta_phi")) spec.params.delta_phi = cfg.params.at("delta_phi");
    if (cfg.params.count("tau")) spec.params.tau = cfg.params.at("tau");
    if (cfg.params.count("sigma")) spec.params.sigma = cfg.params.at("sigma");
    if (cfg.params.count("alpha")) spec.params.alpha = cfg.params.at("alpha");
    return spec;
}

// --- config text format -------------------------------------------------
//
//   experiment croca_full
//   model CI
//   delta_theta uniform      (or a number)
//   delta_phi 0
//   samples 100000
//   seed 42
//   format csv
//   out results.csv
//   sweep {
//     param delta_phi
//     from 0
//     to 3.14159
//     steps 33
//   }

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    cfg.samples = -1;  // sentinel: not set
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool in_sweep = false;
    SweepBlock sweep;
    auto fail = [&](const std::string& what) {
        throw ConfigError("config line " + std::to_string(lineno) + ": " + what);
    };
    auto to_double = [&](const std::string& v, const std::string& key) {
        try {
            size_t pos = 0;
            double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            fail("field '" + key + "': expected a number, got '" + v + "'");
            return 0.0;
        }
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = line.substr(0, line.find('#'));
        std::istringstream ls(stripped);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "}") {
            if (!in_sweep) fail("unexpected '}'");
            in_sweep = false;
            cfg.sweep = sweep;
            continue;
        }
        std::string value;
        std::getline(ls, value);
        size_t a = value.find_first_not_of(" \t");
        value = (a == std::string::npos) ? "" : value.substr(a);
        size_t b = value.find_last_not_of(" \t\r");
        if (b != std::string::npos) value = value.substr(0, b + 1);

        if (in_sweep) {
            if (key == "param") sweep.param = value;
            else if (key == "from") sweep.from = to_double(value, key);
            else if (key == "to") sweep.to = to_double(value, key);
            else if (key == "steps") sweep.steps = static_cast<int>(to_double(value, key));
            else fail("unknown sweep field '" + key + "'");
            continue;
        }
        if (key == "sweep") {
            if (value != "{") fail("expected 'sweep {'");
            in_sweep = true;
        } else if (key == "experiment") {
            cfg.experiment = value;
        } else if (key == "model") {
            cfg.models.push_back(value);
        } else if (key == "delta_theta") {
            if (value == "uniform") cfg.theta_uniform = true;
            else cfg.params["delta_theta"] = to_double(value, key);
        } else if (key == "delta_phi" || key == "tau" || key == "sigma" || key == "alpha") {
            cfg.params[key] = to_double(value, key);
        } else if (key == "samples") {
            cfg.samples = static_cast<int>(to_double(value, key));
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(to_double(value, key));
        } else if (key == "format") {
            if (value != "csv" && value != "json") fail("format must be csv or json");
            cfg.format = value;
        } else if (key == "out") {
            cfg.out = value;
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    if (in_sweep) throw ConfigError("config: unterminated sweep block");
    if (cfg.samples < 0) {
        cfg.samples = 100000;
        if (const char* env = std::getenv(kSamplesEnvVar)) cfg.samples = std::atoi(env);
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

inline std::string dump_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "experiment " << cfg.experiment << "\n";
    for (Model m : resolve_models(cfg.models)) os << "model " << model_name(m) << "\n";
    if (cfg.theta_uniform)
        os << "delta_theta uniform\n";
    else if (cfg.params.count("delta_theta"))
        os << "delta_theta " << format_double(cfg.params.at("delta_theta")) << "\n";
    for (const auto& key : {"delta_phi", "tau", "sigma", "alpha"})
        if (cfg.params.count(key))
            os << key << " " << format_double(cfg.params.at(key)) << "\n";
    os << "samples " << cfg.samples << "\n";
    os << "seed " << cfg.seed << "\n";
    os << "format " << cfg.format << "\n";
    if (!cfg.out.empty()) os << "out " << cfg.out << "\n";
    if (cfg.sweep) {
        os << "sweep {\n";
        os << "  param " << cfg.sweep->param << "\n";
        os << "  from " << format_double(cfg.sweep->from) << "\n";
        os << "  to " << format_double(cfg.sweep->to) << "\n";
        os << "  steps " << cfg.sweep->steps << "\n";
        os << "}\n";
    }
    return os.str();
}

// --- result writers -------------------------------------------------------

inline void write_csv(std::ostream& os, const std::vector<ExperimentResult>& points,
                      const std::string& sweep_param = "",
                      const std::vector<double>& sweep_values = {}) {
    os << "experiment,model,statistic,value,stderr";
    if (!sweep_param.empty()) os << ',' << sweep_param;
    os << '\n';
    for (size_t i = 0; i < points.size(); ++i) {
        const auto& pt = points[i];
        for (const auto& [model, res] : pt.per_model)
            for (const auto& [stat, v] : res.stats) {
                os << pt.experiment << ',' << model_name(model) << ',' << stat << ','
                   << format_double(v.value) << ',' << format_double(v.stderr_);
                if (!sweep_param.empty()) os << ',' << format_double(sweep_values[i]);
                os << '\n';
            }
    }
}

inline void write_json(std::ostream& os, const RunConfig& cfg,
                       const std::vector<ExperimentResult>& points,
                       const std::string& sweep_param = "",
                       const std::vector<double>& sweep_values = {}) {
    nlohmann::ordered_json doc;
    nlohmann::ordered_json prov;
    prov["version"] = kVersion;
    prov["experiment"] = cfg.experiment;
    prov["seed"] = cfg.seed;
    prov["samples"] = cfg.samples;
    nlohmann::ordered_json pars;
    if (cfg.theta_uniform)
        pars["delta_theta"] = "uniform";
    else if (cfg.params.count("delta_theta"))
        pars["delta_theta"] = cfg.params.at("delta_theta");
    for (const auto& key : {"delta_phi", "tau", "sigma", "alpha"})
        if (cfg.params.count(key)) pars[key] = cfg.params.at(key);
    prov["parameters"] = pars;
    doc["provenance"] = prov;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (size_t i = 0; i < points.size(); ++i) {
        const auto& pt = points[i];
        for (const auto& [model, res] : pt.per_model)
            for (const auto& [stat, v] : res.stats) {
                nlohmann::ordered_json row;
                row["experiment"] = pt.experiment;
                row["model"] = model_name(model);
                row["statistic"] = stat;
                row["value"] = v.value;
                row["stderr"] = v.stderr_;
                if (!sweep_param.empty()) row[sweep_param] = sweep_values[i];
                rows.push_back(row);
            }
        for (const auto& d : pt.divergences) {
            nlohmann::ordered_json row;
            row["experiment"] = pt.experiment;
            row["divergence"] = d;
            if (!sweep_param.empty()) row[sweep_param] = sweep_values[i];
            rows.push_back(row);
        }
    }
    doc["results"] = rows;
    os << doc.dump(2) << '\n';
}

// --- commands --------------------------------------------------------------

struct CommandOutcome {
    int exit_code = 0;
    std::vector<ExperimentResult> points;
    std::string sweep_param;
    std::vector<double> sweep_values;
};

inline std::vector<double> sweep_grid(const SweepBlock& s) {
    if (s.steps < 1) throw ConfigError("sweep needs steps >= 1");
    std::vector<double> grid;
    for (int i = 0; i < s.steps; ++i)
        grid.push_back(s.steps == 1
                           ? s.from
                           : s.from + (s.to - s.from) * i / static_cast<double>(s.steps - 1));
    return grid;
}

inline CommandOutcome execute(const RunConfig& cfg) {
    CommandOutcome out;
    ExperimentSpec spec = to_spec(cfg);
    if (cfg.sweep) {
        if (!parameter_is_sweepable(cfg.sweep->param))
            throw ConfigError("parameter '" + cfg.sweep->param + "' is not sweepable");
        out.sweep_param = cfg.sweep->param;
        out.sweep_values = sweep_grid(*cfg.sweep);
        SweepResult s = sweep(spec, cfg.sweep->param, out.sweep_values);
        out.points = std::move(s.points);
    } else {
        out.points.push_back(compare_models(spec));
    }
    return out;
}

inline int write_output(const RunConfig& cfg, const CommandOutcome& outcome) {
    std::ostringstream body;
    if (cfg.format == "json")
        write_json(body, cfg, outcome.points, outcome.sweep_param, outcome.sweep_values);
    else
        write_csv(body, outcome.points, outcome.sweep_param, outcome.sweep_values);
    if (cfg.out.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream f(cfg.out);
        if (!f) {
            std::cerr << "error: cannot write output file '" << cfg.out << "'\n";
            return 1;
        }
        f << body.str();
    }
    return 0;
}

}  // namespace ew::cli
