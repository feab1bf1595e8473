#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbx/branching.hpp"
#include "sbx/geometry.hpp"

namespace sbx {

struct ConfigError : std::runtime_error {
    int line;
    ConfigError(const std::string& what, int line_no)
        : std::runtime_error(what), line(line_no) {}
};

struct RunConfig {
    SimConfig sim;
    std::string experiment = "simulate";
    int workers = 1;
    std::string source_text; ///< raw config text, hashed into the manifest
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& s, int line) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (...) {
        throw ConfigError("expected a number, got '" + s + "'", line);
    }
    if (pos != s.size()) throw ConfigError("trailing characters after number in '" + s + "'", line);
    return v;
}

/// Atom list: "(x,y):mass, (x,y,z):mass, ..."
inline std::vector<std::pair<Vec, double>> parse_atoms(const std::string& s, int line) {
    std::vector<std::pair<Vec, double>> atoms;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == ',')) ++i;
        if (i >= s.size()) break;
        if (s[i] != '(') throw ConfigError("mu atoms must look like (x,y):mass", line);
        const std::size_t close = s.find(')', i);
        if (close == std::string::npos) throw ConfigError("unterminated '(' in mu", line);
        std::vector<double> coords;
        std::stringstream cs(s.substr(i + 1, close - i - 1));
        std::string tok;
        while (std::getline(cs, tok, ',')) coords.push_back(parse_number(trim(tok), line));
        if (coords.size() != 2 && coords.size() != 3)
            throw ConfigError("mu atoms need 2 or 3 coordinates", line);
        std::size_t j = close + 1;
        while (j < s.size() && s[j] == ' ') ++j;
        if (j >= s.size() || s[j] != ':') throw ConfigError("mu atom missing ':mass'", line);
        std::size_t end = j + 1;
        while (end < s.size() && s[end] != ',' && s[end] != '(') ++end;
        const double mass = parse_number(trim(s.substr(j + 1, end - j - 1)), line);
        Vec v;
        if (coords.size() == 2) {
            v = Vec(coords[0], coords[1]);
        } else {
            v = Vec(coords[0], coords[1], coords[2]);
        }
        atoms.emplace_back(v, mass);
        i = end;
    }
    if (atoms.empty()) throw ConfigError("mu must contain at least one atom", line);
    return atoms;
}

inline std::vector<double> parse_list(const std::string& s, int line) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const std::string t = trim(tok);
        if (!t.empty()) out.push_back(parse_number(t, line));
    }
    return out;
}

} // namespace detail

/// Parse the flat key = value run configuration.  Unknown keys and
/// constraint violations are reported with their line number.
inline RunConfig parse_config_text(const std::string& text) {
    RunConfig rc;
    rc.source_text = text;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    bool mu_seen = false;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        const std::size_t hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string val = detail::trim(s.substr(eq + 1));
        if (val.empty()) throw ConfigError("empty value for '" + key + "'", line);

        if (key == "d") {
            rc.sim.d = static_cast<int>(detail::parse_number(val, line));
            if (rc.sim.d < 2 || rc.sim.d > 3)
                throw ConfigError("d must be 2 or 3", line);
        } else if (key == "beta") {
            rc.sim.beta = detail::parse_number(val, line);
            if (!(rc.sim.beta > 0.0) || rc.sim.beta > 1.0)
                throw ConfigError("beta must lie in (0,1]", line);
        } else if (key == "n") {
            rc.sim.n = static_cast<std::int64_t>(detail::parse_number(val, line));
            if (rc.sim.n < 1) throw ConfigError("n must be >= 1", line);
        } else if (key == "dt") {
            rc.sim.dt = detail::parse_number(val, line);
            if (!(rc.sim.dt > 0.0)) throw ConfigError("dt must be > 0", line);
        } else if (key == "seed") {
            rc.sim.seed = static_cast<std::uint64_t>(detail::parse_number(val, line));
        } else if (key == "replicas") {
            rc.sim.replicas = static_cast<int>(detail::parse_number(val, line));
            if (rc.sim.replicas < 1) throw ConfigError("replicas must be >= 1", line);
        } else if (key == "mu") {
            rc.sim.mu = detail::parse_atoms(val, line);
            mu_seen = true;
        } else if (key == "eps_list") {
            rc.sim.eps_list = detail::parse_list(val, line);
        } else if (key == "max_events") {
            rc.sim.max_events = static_cast<std::int64_t>(detail::parse_number(val, line));
        } else if (key == "boundary_refine") {
            rc.sim.boundary_refine = static_cast<int>(detail::parse_number(val, line));
        } else if (key == "experiment") {
            rc.experiment = val;
        } else if (key == "workers") {
            rc.workers = static_cast<int>(detail::parse_number(val, line));
            if (rc.workers < 1) throw ConfigError("workers must be >= 1", line);
        } else {
            throw ConfigError("unknown key '" + key + "'", line);
        }
    }
    (void)mu_seen;

    for (const auto& [pos, mass] : rc.sim.mu) {
        if (pos.d != rc.sim.d)
            throw ConfigError("mu atom dimension does not match d", 0);
        if (!(rho(pos) > 0.0))
            throw ConfigError("mu atoms must lie strictly inside the unit ball", 0);
        if (!(mass > 0.0)) throw ConfigError("mu atom masses must be > 0", 0);
    }
    if (rc.experiment == "density" &&
        !(static_cast<double>(rc.sim.d) < 1.0 + 2.0 / rc.sim.beta))
        throw ConfigError(
            "density experiments require d < 1 + 2/beta (the exit measure has "
            "no density otherwise)",
            0);
    try {
        rc.sim.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what(), 0);
    }
    return rc;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str());
    } catch (ConfigError& e) {
        throw ConfigError(path + ":" + std::to_string(e.line) + ": " + e.what(), e.line);
    }
}

} // namespace sbx
