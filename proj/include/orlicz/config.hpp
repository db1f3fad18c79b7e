#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "orlicz/algebra.hpp"
#include "orlicz/liptrunc.hpp"
#include "orlicz/nfunction.hpp"

namespace orlicz {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key-value text with [section] headers; '#' starts a comment.  Keys are
/// addressed as "section.key"; the experiment loader validates everything up
/// front with field-level messages.
class Config {
public:
    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim_(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("line " + std::to_string(lineno) +
                                      ": malformed section header '" + line + "'");
                section = trim_(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + line + "'");
            const std::string key = trim_(line.substr(0, eq));
            const std::string value = trim_(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config field '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : to_double_(key, it->second);
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("field '" + key + "': expected an integer, got '" +
                              it->second + "'");
        }
    }

    std::vector<double> get_doubles(const std::string& key,
                                    std::vector<double> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        std::istringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim_(item);
            if (!item.empty()) out.push_back(to_double_(key, item));
        }
        return out;
    }

private:
    static std::string trim_(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }
    static double to_double_(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing");
            return x;
        } catch (const std::exception&) {
            throw ConfigError("field '" + key + "': expected a number, got '" + v + "'");
        }
    }

    std::map<std::string, std::string> values_;
};

/// Validated experiment description shared by the CLI stages.
struct ExperimentConfig {
    CatalogSpec phi;
    std::string integrand_kind = "radial"; // radial | perturbed
    double integrand_eps = 0.0;
    double mesh_L = 1.0;
    double mesh_h = 1.0 / 32.0;
    std::string boundary_tag = "affine"; // affine | harmonic-poly | affine-perturbed |
                                         // kink | custom-coefficients
    Mat22 boundary_q = Mat22::outer({1, 0}, {1, 0});
    double boundary_eps = 0.01;
    std::vector<double> u1_coeffs, u2_coeffs; // 1, x, y, x^2, xy, y^2
    Vec2 center;
    std::vector<double> radii = {0.4, 0.2, 0.1, 0.05};
    double beta = 0.5;
    std::vector<double> deltas = {0.1, 0.03, 0.01};
    double s = 1.25;
    double s0 = 1.25;
    std::string gamma_mode = "median"; // median | fixed
    double gamma = 1.0;
    int m0 = 8;
    std::vector<SpikeSpec> spikes;
    double grid_step = 0.125;
    std::uint64_t seed = 42;
    std::string out_dir = "out";

    static ExperimentConfig load(const Config& c) {
        ExperimentConfig e;
        e.phi.kind = c.get_string("phi.kind", "power");
        e.phi.p = c.get_double("phi.p", 2.0);
        if (e.phi.kind != "power" && e.phi.kind != "power_log" && e.phi.kind != "quadratic")
            throw ConfigError("field 'phi.kind': unknown kind '" + e.phi.kind + "'");
        if (!(e.phi.p > 1.0))
            throw ConfigError("field 'phi.p': must be > 1 (conjugate degenerates)");

        e.integrand_kind = c.get_string("integrand.kind", "radial");
        if (e.integrand_kind != "radial" && e.integrand_kind != "perturbed")
            throw ConfigError("field 'integrand.kind': unknown kind '" +
                              e.integrand_kind + "'");
        e.integrand_eps = c.get_double("integrand.eps", 0.0);
        if (e.integrand_eps < 0.0 || e.integrand_eps > 0.5)
            throw ConfigError("field 'integrand.eps': must lie in [0, 0.5]");

        e.mesh_L = c.get_double("mesh.L", 1.0);
        e.mesh_h = c.get_double("mesh.h", 1.0 / 32.0);
        if (!(e.mesh_L > 0.0)) throw ConfigError("field 'mesh.L': must be positive");
        if (!(e.mesh_h > 0.0) || e.mesh_h > e.mesh_L)
            throw ConfigError("field 'mesh.h': must satisfy 0 < h <= L");

        e.boundary_tag = c.get_string("boundary.tag", "affine");
        const bool known = e.boundary_tag == "affine" || e.boundary_tag == "harmonic-poly" ||
                           e.boundary_tag == "affine-perturbed" || e.boundary_tag == "kink" ||
                           e.boundary_tag == "custom-coefficients";
        if (!known)
            throw ConfigError("field 'boundary.tag': unknown tag '" + e.boundary_tag + "'");
        e.boundary_q.e[0][0] = c.get_double("boundary.q11", 1.0);
        e.boundary_q.e[0][1] = c.get_double("boundary.q12", 0.0);
        e.boundary_q.e[1][0] = c.get_double("boundary.q21", 0.0);
        e.boundary_q.e[1][1] = c.get_double("boundary.q22", 0.0);
        e.boundary_eps = c.get_double("boundary.eps", 0.01);
        e.u1_coeffs = c.get_doubles("boundary.u1_coeffs", {0, 1, 0, 0, 0, 0});
        e.u2_coeffs = c.get_doubles("boundary.u2_coeffs", {0, 0, 0, 0, 0, 0});
        if (e.boundary_tag == "custom-coefficients" &&
            (e.u1_coeffs.size() != 6 || e.u2_coeffs.size() != 6))
            throw ConfigError("fields 'boundary.u1_coeffs'/'u2_coeffs': need 6 "
                              "coefficients (1, x, y, x^2, xy, y^2)");

        e.center = {c.get_double("balls.center_x", 0.0), c.get_double("balls.center_y", 0.0)};
        e.radii = c.get_doubles("balls.radii", e.radii);
        for (std::size_t i = 0; i + 1 < e.radii.size(); ++i)
            if (!(e.radii[i] > e.radii[i + 1]))
                throw ConfigError("field 'balls.radii': must be strictly decreasing");
        if (e.radii.empty() || !(e.radii.front() > 0.0))
            throw ConfigError("field 'balls.radii': need at least one positive radius");

        e.beta = c.get_double("excess.beta", 0.5);
        if (!(e.beta > 0.0) || !(e.beta < 1.0))
            throw ConfigError("field 'excess.beta': must lie in (0, 1)");
        e.deltas = c.get_doubles("excess.deltas", e.deltas);
        for (double d : e.deltas)
            if (!(d > 0.0)) throw ConfigError("field 'excess.deltas': must be positive");
        e.s = c.get_double("excess.s", 1.25);
        if (!(e.s > 1.0)) throw ConfigError("field 'excess.s': must be > 1");
        e.s0 = c.get_double("excess.s0", 1.25);
        if (!(e.s0 > 1.0)) throw ConfigError("field 'excess.s0': must be > 1");

        e.gamma_mode = c.get_string("truncation.gamma_mode", "median");
        if (e.gamma_mode != "median" && e.gamma_mode != "fixed")
            throw ConfigError("field 'truncation.gamma_mode': unknown mode '" +
                              e.gamma_mode + "'");
        e.gamma = c.get_double("truncation.gamma", 1.0);
        if (!(e.gamma > 0.0)) throw ConfigError("field 'truncation.gamma': must be > 0");
        e.m0 = static_cast<int>(c.get_int("truncation.m0", 8));
        if (e.m0 < 1) throw ConfigError("field 'truncation.m0': must be >= 1");
        // spikes: "x:y:height; x:y:height"
        if (c.has("truncation.spikes")) {
            std::istringstream ss(c.require_string("truncation.spikes"));
            std::string item;
            while (std::getline(ss, item, ';')) {
                double x, y, hgt;
                if (std::sscanf(item.c_str(), " %lg : %lg : %lg", &x, &y, &hgt) != 3)
                    throw ConfigError("field 'truncation.spikes': expected "
                                      "'x:y:height; ...', got '" + item + "'");
                e.spikes.push_back({{x, y}, hgt});
            }
        } else {
            e.spikes = {{{0.0, 0.0}, 1.0}};
        }

        e.grid_step = c.get_double("scan.grid_step", 0.125);
        if (!(e.grid_step > 0.0))
            throw ConfigError("field 'scan.grid_step': must be positive");

        const long long seed = c.get_int("run.seed", 42);
        e.seed = static_cast<std::uint64_t>(seed);
        e.out_dir = c.get_string("run.out", "out");
        return e;
    }

    NFunction make_phi() const { return make_catalog(phi); }

    std::function<Vec2(Vec2)> boundary_data() const {
        const Mat22 q = boundary_q;
        const double eps = boundary_eps;
        if (boundary_tag == "affine")
            return [q](Vec2 p) { return q.apply(p); };
        if (boundary_tag == "harmonic-poly")
            return [](Vec2 p) { return Vec2{p.x * p.x - p.y * p.y, 0.0}; };
        if (boundary_tag == "affine-perturbed")
            return [q, eps](Vec2 p) {
                return q.apply(p) + Vec2{eps * std::sin(1.3 * p.x + 0.7 * p.y),
                                         eps * std::cos(0.9 * p.x - 1.1 * p.y)};
            };
        if (boundary_tag == "kink")
            return [eps](Vec2 p) {
                return Vec2{std::max(p.x, 0.0) + eps * 0.5 * (p.x * p.x + p.y * p.y), 0.0};
            };
        const std::vector<double> a = u1_coeffs, b = u2_coeffs;
        return [a, b](Vec2 p) {
            auto poly = [&p](const std::vector<double>& c) {
                return c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.x +
                       c[4] * p.x * p.y + c[5] * p.y * p.y;
            };
            return Vec2{poly(a), poly(b)};
        };
    }
};

} // namespace orlicz
