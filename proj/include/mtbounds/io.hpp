#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtbounds/measure.hpp"

namespace mtbounds {

using ordered_json = nlohmann::ordered_json;

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& what_) : std::runtime_error(what_) {}
};

/// Fixed 17-significant-digit formatting, reproducible across runs.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Parse {"atoms":[{"x":..,"w":..}],"uniform":[{"lo":..,"hi":..,"w":..}]}.
/// Unknown fields are rejected at every level; both arrays are optional.
inline Measure parse_measure_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("measure: expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (key != "atoms" && key != "uniform") {
            throw SchemaError("measure: unknown field \"" + key + "\"");
        }
    }
    std::vector<Atom> atoms;
    std::vector<UniformPiece> uniforms;
    if (j.contains("atoms")) {
        if (!j["atoms"].is_array()) throw SchemaError("measure: atoms must be an array");
        for (const auto& e : j["atoms"]) {
            if (!e.is_object()) throw SchemaError("measure: atom must be an object");
            for (const auto& [key, _] : e.items()) {
                if (key != "x" && key != "w") {
                    throw SchemaError("measure: unknown atom field \"" + key + "\"");
                }
            }
            if (!e.contains("x") || !e.contains("w")) {
                throw SchemaError("measure: atom needs x and w");
            }
            atoms.push_back({e["x"].get<double>(), e["w"].get<double>()});
        }
    }
    if (j.contains("uniform")) {
        if (!j["uniform"].is_array()) {
            throw SchemaError("measure: uniform must be an array");
        }
        for (const auto& e : j["uniform"]) {
            if (!e.is_object()) throw SchemaError("measure: piece must be an object");
            for (const auto& [key, _] : e.items()) {
                if (key != "lo" && key != "hi" && key != "w") {
                    throw SchemaError("measure: unknown piece field \"" + key + "\"");
                }
            }
            if (!e.contains("lo") || !e.contains("hi") || !e.contains("w")) {
                throw SchemaError("measure: piece needs lo, hi and w");
            }
            uniforms.push_back({e["lo"].get<double>(), e["hi"].get<double>(),
                                e["w"].get<double>()});
        }
    }
    try {
        return Measure(std::move(atoms), std::move(uniforms));
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("measure: ") + e.what());
    }
}

inline Measure load_measure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return parse_measure_json(j);
}

inline ordered_json measure_to_json(const Measure& m) {
    if (!m.invcube_pieces().empty()) {
        throw std::runtime_error(
            "measure_to_json: inverse-cube pieces have no JSON form");
    }
    ordered_json j;
    j["atoms"] = ordered_json::array();
    for (const auto& a : m.atoms()) {
        j["atoms"].push_back({{"x", a.x}, {"w", a.w}});
    }
    j["uniform"] = ordered_json::array();
    for (const auto& p : m.uniform_pieces()) {
        j["uniform"].push_back({{"lo", p.lo}, {"hi", p.hi}, {"w", p.w}});
    }
    return j;
}

/// Serialize with deterministic float formatting: every double is emitted
/// through format_double, so identical inputs give byte-identical output.
inline std::string dump_deterministic(const ordered_json& j, int indent = 2) {
    std::ostringstream out;
    std::function<void(const ordered_json&, int)> rec =
        [&](const ordered_json& node, int depth) {
            const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
            const std::string pad1(static_cast<std::size_t>(indent) * (depth + 1),
                                   ' ');
            if (node.is_object()) {
                if (node.empty()) {
                    out << "{}";
                    return;
                }
                out << "{\n";
                bool first = true;
                for (const auto& [k, v] : node.items()) {
                    if (!first) out << ",\n";
                    first = false;
                    out << pad1 << '"' << k << "\": ";
                    rec(v, depth + 1);
                }
                out << "\n" << pad << "}";
            } else if (node.is_array()) {
                if (node.empty()) {
                    out << "[]";
                    return;
                }
                out << "[\n";
                bool first = true;
                for (const auto& v : node) {
                    if (!first) out << ",\n";
                    first = false;
                    out << pad1;
                    rec(v, depth + 1);
                }
                out << "\n" << pad << "]";
            } else if (node.is_number_float()) {
                out << format_double(node.get<double>());
            } else {
                out << node.dump();
            }
        };
    rec(j, 0);
    out << "\n";
    return out.str();
}

}  // namespace mtbounds
