#include "tcar/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tcar/errors.hpp"

namespace tcar {

void ContourConfig::validate() const {
    if (!(rho1_max > rho1_min) || !(rho2_max > rho2_min))
        throw ValidationError("contour: density ranges must be increasing");
    if (!(rho1_min > 0.0) || !(rho2_min > 0.0))
        throw ValidationError("contour: density ranges must be positive");
    if (resolution < 2)
        throw ValidationError("contour: requires resolution >= 2, got " + std::to_string(resolution));
}

Scenario scenario_from_name(const std::string& name) {
    if (name == "open-loop") return Scenario::OpenLoop;
    if (name == "full-state") return Scenario::FullStateFeedback;
    if (name == "output-feedback") return Scenario::OutputFeedback;
    throw ValidationError("scenario: must be open-loop, full-state or output-feedback, got \"" + name +
                          "\"");
}

namespace {

enum class Dim { Time, Speed, Length, Area, Density, None };

const std::map<Dim, std::map<std::string, double>> kUnits = {
    {Dim::Time, {{"s", 1.0}, {"min", 60.0}, {"h", 3600.0}}},
    {Dim::Speed, {{"m/s", 1.0}, {"km/h", 1.0 / 3.6}}},
    {Dim::Length, {{"m", 1.0}, {"km", 1000.0}}},
    {Dim::Area, {{"m^2", 1.0}}},
    {Dim::Density, {{"veh/m", 1.0}, {"veh/km", 1e-3}}},
};

const char* dim_name(Dim d) {
    switch (d) {
        case Dim::Time: return "time";
        case Dim::Speed: return "speed";
        case Dim::Length: return "length";
        case Dim::Area: return "area";
        case Dim::Density: return "density";
        case Dim::None: return "dimensionless";
    }
    return "?";
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Entry {
    bool seen = false;
    std::string raw;
    int line = 0;
};

class Parser {
public:
    explicit Parser(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError("config line " + std::to_string(no) + ": expected key = value, got \"" +
                                 line + "\"");
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (key.empty() || val.empty())
                throw ParseError("config line " + std::to_string(no) + ": empty key or value");
            if (entries_.count(key))
                throw ParseError("config line " + std::to_string(no) + ": duplicate key \"" + key + "\"");
            entries_[key] = Entry{true, val, no};
        }
    }

    double number(const std::string& key, Dim dim, double fallback, bool required = false) {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (required) throw ParseError("config: missing required key \"" + key + "\"");
            return fallback;
        }
        used_.insert(key);
        const Entry& e = it->second;
        const char* begin = e.raw.c_str();
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin)
            throw ParseError("config line " + std::to_string(e.line) + ": key \"" + key +
                             "\" needs a numeric value, got \"" + e.raw + "\"");
        const std::string unit = trim(std::string(end));
        if (dim == Dim::None) {
            if (!unit.empty())
                throw ParseError("config line " + std::to_string(e.line) + ": key \"" + key +
                                 "\" is dimensionless but has unit \"" + unit + "\"");
            return v;
        }
        if (unit.empty())
            throw ParseError("config line " + std::to_string(e.line) + ": key \"" + key +
                             "\" needs a " + dim_name(dim) + " unit");
        const auto& table = kUnits.at(dim);
        const auto u = table.find(unit);
        if (u == table.end())
            throw ParseError("config line " + std::to_string(e.line) + ": unknown " + dim_name(dim) +
                             " unit \"" + unit + "\" for key \"" + key + "\"");
        return v * u->second;
    }

    std::string text(const std::string& key, const std::string& fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        used_.insert(key);
        return it->second.raw;
    }

    void finish() const {
        for (const auto& [key, e] : entries_)
            if (!used_.count(key))
                throw ParseError("config line " + std::to_string(e.line) + ": unknown key \"" + key +
                                 "\"");
    }

private:
    std::map<std::string, Entry> entries_;
    std::set<std::string> used_;
};

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    Parser p(text);
    RunConfig rc;

    for (int i = 0; i < 2; ++i) {
        const std::string sfx = "_" + std::to_string(i + 1);
        rc.classes[i].tau = p.number("tau" + sfx, Dim::Time, 0.0, true);
        rc.classes[i].gamma = p.number("gamma" + sfx, Dim::None, 0.0, true);
        rc.classes[i].v_free = p.number("v_free" + sfx, Dim::Speed, 0.0, true);
        rc.classes[i].ao_max = p.number("ao_max" + sfx, Dim::None, 0.0, true);
        rc.classes[i].a = p.number("area" + sfx, Dim::Area, 0.0, true);
        rc.rho_star[i] = p.number("rho_star" + sfx, Dim::Density, 0.0, true);
    }
    rc.road.width = p.number("road_width", Dim::Length, 0.0, true);
    rc.road.length = p.number("road_length", Dim::Length, 0.0, true);

    rc.sim.grid_n = static_cast<int>(p.number("grid_n", Dim::None, 200));
    rc.sim.cfl_fraction = p.number("cfl_fraction", Dim::None, 0.9);
    rc.sim.t_end = p.number("t_end", Dim::Time, -1.0);
    rc.sim.scenario = scenario_from_name(p.text("scenario", "open-loop"));
    rc.sim.amplitude = p.number("amplitude", Dim::None, 0.25);
    const double periods = p.number("periods", Dim::None, 2.0);
    rc.sim.snapshot_target = static_cast<int>(p.number("snapshots", Dim::None, 200));
    rc.sim.kernel_options.grid_n = static_cast<int>(p.number("kernel_n", Dim::None, 101));
    rc.sim.kernel_options.tolerance = p.number("kernel_tol", Dim::None, 1e-8);
    rc.sim.kernel_options.max_iterations =
        static_cast<int>(p.number("kernel_max_iter", Dim::None, 200));

    rc.contour.rho1_min = p.number("contour_rho1_min", Dim::Density, rc.contour.rho1_min);
    rc.contour.rho1_max = p.number("contour_rho1_max", Dim::Density, rc.contour.rho1_max);
    rc.contour.rho2_min = p.number("contour_rho2_min", Dim::Density, rc.contour.rho2_min);
    rc.contour.rho2_max = p.number("contour_rho2_max", Dim::Density, rc.contour.rho2_max);
    rc.contour.resolution = static_cast<int>(p.number("contour_resolution", Dim::None, 200));
    rc.out_dir = p.text("out_dir", rc.out_dir);
    p.finish();

    rc.classes[0].validate("class 1");
    rc.classes[1].validate("class 2");
    rc.road.validate();
    for (int i = 0; i < 2; ++i)
        if (!(rc.rho_star[i] > 0.0))
            throw ValidationError("equilibrium: requires rho_star_" + std::to_string(i + 1) +
                                  " > 0, got value = " + std::to_string(rc.rho_star[i]));
    if (!(periods > 0.0)) throw ValidationError("sim: requires periods > 0");
    rc.sim.wavenumber = 2.0 * M_PI * periods / rc.road.length;
    if (p.text("t_end", "").empty() == false && !(rc.sim.t_end > 0.0))
        throw ValidationError("sim: requires t_end > 0 when given");
    rc.sim.validate();
    rc.contour.validate();
    return rc;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config: cannot open \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace tcar
