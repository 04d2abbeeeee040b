#include "statmicro/params_io.hpp"

#include "statmicro/errors.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

namespace statmicro {

namespace {

using nlohmann::json;

json toml_to_json(const toml::node& node, const std::string& path, std::map<std::string, int>& lines);

json toml_table_to_json(const toml::table& table, const std::string& prefix, std::map<std::string, int>& lines) {
    json out = json::object();
    for (const auto& [key, value] : table) {
        const std::string path = prefix.empty() ? std::string(key.str()) : prefix + "." + std::string(key.str());
        lines[path] = static_cast<int>(key.source().begin.line);
        out[std::string(key.str())] = toml_to_json(value, path, lines);
    }
    return out;
}

json toml_to_json(const toml::node& node, const std::string& path, std::map<std::string, int>& lines) {
    if (const auto* table = node.as_table()) {
        return toml_table_to_json(*table, path, lines);
    }
    if (const auto* array = node.as_array()) {
        json out = json::array();
        for (const auto& element : *array) {
            out.push_back(toml_to_json(element, path, lines));
        }
        return out;
    }
    if (const auto* v = node.as_integer()) return json(v->get());
    if (const auto* v = node.as_floating_point()) return json(v->get());
    if (const auto* v = node.as_boolean()) return json(v->get());
    if (const auto* v = node.as_string()) return json(v->get());
    throw ValidationError("'" + path + "': date and time values are not supported", path,
                          static_cast<int>(node.source().begin.line));
}

// nlohmann::json does not track source positions, so key lines are recovered
// from the text, keyed by dotted path.
void scan_json_lines(std::string_view text, std::map<std::string, int>& lines) {
    static const std::regex key_re(R"re("((?:[^"\\]|\\.)*)"\s*:)re");
    std::vector<std::string> stack;
    std::string pending;
    int line = 1;
    std::size_t i = 0;
    const std::string str(text);
    while (i < str.size()) {
        const char c = str[i];
        if (c == '\n') {
            ++line;
            ++i;
        } else if (c == '"') {
            std::smatch match;
            const auto begin = str.cbegin() + static_cast<std::ptrdiff_t>(i);
            if (std::regex_search(begin, str.cend(), match, key_re, std::regex_constants::match_continuous)) {
                const std::string key = match[1].str();
                std::string path;
                for (const auto& part : stack) path += part.empty() ? "" : part + ".";
                path += key;
                lines.emplace(path, line);
                pending = key;
                i += static_cast<std::size_t>(match.length(0));
            } else {
                ++i;
                while (i < str.size() && str[i] != '"') {
                    if (str[i] == '\\') ++i;
                    if (i < str.size() && str[i] == '\n') ++line;
                    ++i;
                }
                ++i;
            }
        } else if (c == '{') {
            stack.push_back(pending);
            pending.clear();
            ++i;
        } else if (c == '}') {
            if (!stack.empty()) stack.pop_back();
            ++i;
        } else if (c == '[') {
            // arrays add no path component
            stack.emplace_back();
            ++i;
        } else if (c == ']') {
            if (!stack.empty()) stack.pop_back();
            ++i;
        } else {
            ++i;
        }
    }
}

const std::set<std::string> kParamKeys = {"n_commodities", "a",      "b",           "d",
                                          "s",             "m",      "p_scale",     "kinetic_accel",
                                          "kinetic_vel",   "rotation"};

double number_field(const Document& doc, const json& value, const std::string& key) {
    if (!value.is_number()) {
        throw ValidationError(doc.locate(key, "field '" + key + "' must be a number"), key, doc.line_of(key));
    }
    return value.get<double>();
}

Vector vector_field(const Document& doc, const std::string& key, std::size_t n, bool required,
                    double fallback = 0.0) {
    const auto ni = static_cast<Eigen::Index>(n);
    const json& data = doc.data;
    if (!data.contains(key)) {
        if (required) {
            throw ValidationError(doc.locate(key, "missing required field '" + key + "'"), key, 0);
        }
        return Vector::Constant(ni, fallback);
    }
    const json& value = data.at(key);
    if (value.is_number()) {
        return Vector::Constant(ni, value.get<double>());
    }
    if (!value.is_array()) {
        throw ValidationError(doc.locate(key, "field '" + key + "' must be a number or an array of numbers"), key,
                              doc.line_of(key));
    }
    if (value.size() != n) {
        std::ostringstream os;
        os << "field '" << key << "' has " << value.size() << " entries, expected " << n;
        throw ValidationError(doc.locate(key, os.str()), key, doc.line_of(key));
    }
    Vector out(ni);
    for (std::size_t i = 0; i < n; ++i) {
        if (!value[i].is_number()) {
            std::ostringstream os;
            os << "field '" << key << "' entry " << (i + 1) << " must be a number";
            throw ValidationError(doc.locate(key, os.str()), key, doc.line_of(key));
        }
        out(static_cast<Eigen::Index>(i)) = value[i].get<double>();
    }
    return out;
}

std::size_t infer_size(const Document& doc) {
    const json& data = doc.data;
    if (data.contains("n_commodities")) {
        const json& n = data.at("n_commodities");
        if (!n.is_number_integer() || n.get<long long>() <= 0) {
            throw ValidationError(doc.locate("n_commodities", "field 'n_commodities' must be a positive integer"),
                                  "n_commodities", doc.line_of("n_commodities"));
        }
        return static_cast<std::size_t>(n.get<long long>());
    }
    for (const char* key : {"a", "b", "d", "s"}) {
        if (data.contains(key) && data.at(key).is_array()) {
            return data.at(key).size();
        }
    }
    throw ValidationError(doc.locate("n_commodities", "cannot infer 'n_commodities'; give it or use array fields"),
                          "n_commodities", 0);
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    std::string out = os.str();
    if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
    return out;
}

}  // namespace

int Document::line_of(const std::string& path) const {
    const auto it = lines.find(path);
    return it == lines.end() ? 0 : it->second;
}

std::string Document::locate(const std::string& path, const std::string& message) const {
    const int line = line_of(path);
    std::ostringstream os;
    os << source;
    if (line > 0) os << ":" << line;
    os << ": " << message;
    return os.str();
}

Document parse_document(std::string_view text, DocumentFormat format, std::string source) {
    Document doc;
    doc.source = std::move(source);
    if (format == DocumentFormat::toml) {
        try {
            const toml::table table = toml::parse(text, doc.source);
            doc.data = toml_table_to_json(table, "", doc.lines);
        } catch (const toml::parse_error& e) {
            const int line = static_cast<int>(e.source().begin.line);
            std::ostringstream os;
            os << doc.source << ":" << line << ": " << e.description();
            throw ValidationError(os.str(), {}, line);
        }
    } else {
        try {
            doc.data = json::parse(text);
        } catch (const json::parse_error& e) {
            int line = 1;
            for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
                if (text[i] == '\n') ++line;
            }
            std::ostringstream os;
            os << doc.source << ":" << line << ": JSON syntax error";
            throw ValidationError(os.str(), {}, line);
        }
        if (!doc.data.is_object()) {
            throw ValidationError(doc.source + ": top-level JSON value must be an object");
        }
        scan_json_lines(text, doc.lines);
    }
    return doc;
}

Document load_document(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const auto format = path.extension() == ".json" ? DocumentFormat::json : DocumentFormat::toml;
    return parse_document(buffer.str(), format, path.string());
}

ModelParams params_from_document(const Document& doc) {
    for (const auto& [key, value] : doc.data.items()) {
        if (!kParamKeys.count(key)) {
            throw ValidationError(doc.locate(key, "unknown field '" + key + "'"), key, doc.line_of(key));
        }
    }
    ModelParams params;
    params.n_commodities = infer_size(doc);
    const std::size_t n = params.n_commodities;
    const auto ni = static_cast<Eigen::Index>(n);
    params.a = vector_field(doc, "a", n, true);
    params.b = vector_field(doc, "b", n, true);
    params.d = vector_field(doc, "d", n, true);
    params.s = vector_field(doc, "s", n, true);
    if (!doc.data.contains("m")) {
        throw ValidationError(doc.locate("m", "missing required field 'm'"), "m", 0);
    }
    params.m = number_field(doc, doc.data.at("m"), "m");
    params.p_scale = doc.data.contains("p_scale") ? number_field(doc, doc.data.at("p_scale"), "p_scale") : 1.0;
    params.kinetic_accel = vector_field(doc, "kinetic_accel", n, false, 1.0);
    params.kinetic_vel = vector_field(doc, "kinetic_vel", n, false, 1.0);
    params.rotation = Matrix::Identity(ni, ni);
    if (doc.data.contains("rotation")) {
        const json& rows = doc.data.at("rotation");
        const bool shape_ok = rows.is_array() && rows.size() == n &&
                              std::all_of(rows.begin(), rows.end(), [n](const json& r) {
                                  return r.is_array() && r.size() == n &&
                                         std::all_of(r.begin(), r.end(), [](const json& x) { return x.is_number(); });
                              });
        if (!shape_ok) {
            throw ValidationError(doc.locate("rotation", "field 'rotation' must be an N x N array of numbers"),
                                  "rotation", doc.line_of("rotation"));
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                params.rotation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
            }
        }
    }
    try {
        params.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(doc.locate(e.field(), e.what()), e.field(), doc.line_of(e.field()));
    }
    return params;
}

ModelParams load_params(const std::filesystem::path& path) { return params_from_document(load_document(path)); }

ModelParams parse_params(std::string_view text, DocumentFormat format, std::string source) {
    return params_from_document(parse_document(text, format, std::move(source)));
}

nlohmann::json params_to_json(const ModelParams& params) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    json rotation = json::array();
    for (Eigen::Index i = 0; i < params.rotation.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < params.rotation.cols(); ++j) row.push_back(params.rotation(i, j));
        rotation.push_back(row);
    }
    return json{{"n_commodities", params.n_commodities},
                {"a", vec(params.a)},
                {"b", vec(params.b)},
                {"d", vec(params.d)},
                {"s", vec(params.s)},
                {"m", params.m},
                {"p_scale", params.p_scale},
                {"kinetic_accel", vec(params.kinetic_accel)},
                {"kinetic_vel", vec(params.kinetic_vel)},
                {"rotation", rotation}};
}

std::string params_to_toml(const ModelParams& params) {
    auto vec = [](const Vector& v) {
        std::string out = "[";
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            out += format_double(v(i));
        }
        return out + "]";
    };
    std::ostringstream os;
    os << "n_commodities = " << params.n_commodities << "\n";
    os << "a = " << vec(params.a) << "\n";
    os << "b = " << vec(params.b) << "\n";
    os << "d = " << vec(params.d) << "\n";
    os << "s = " << vec(params.s) << "\n";
    os << "m = " << format_double(params.m) << "\n";
    os << "p_scale = " << format_double(params.p_scale) << "\n";
    os << "kinetic_accel = " << vec(params.kinetic_accel) << "\n";
    os << "kinetic_vel = " << vec(params.kinetic_vel) << "\n";
    os << "rotation = [";
    for (Eigen::Index i = 0; i < params.rotation.rows(); ++i) {
        if (i) os << ", ";
        os << vec(params.rotation.row(i).transpose());
    }
    os << "]\n";
    return os.str();
}

}  // namespace statmicro
