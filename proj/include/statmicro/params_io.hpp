#pragma once

#include "statmicro/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace statmicro {

enum class DocumentFormat { toml, json };

/// A parsed TOML or JSON document normalised to JSON, with the source line of
/// every key (dotted path, e.g. "lattice.n_steps") for error reporting.
struct Document {
    nlohmann::json data = nlohmann::json::object();
    std::map<std::string, int> lines;
    std::string source;

    /// Line of a dotted key path, 0 when unknown.
    int line_of(const std::string& path) const;

    /// "source:line: message" when the line is known, "source: message" otherwise.
    std::string locate(const std::string& path, const std::string& message) const;
};

/// Parses `text`. Syntax errors throw ValidationError carrying the line.
Document parse_document(std::string_view text, DocumentFormat format, std::string source = "<input>");

/// Reads a file; the format follows the extension (.json, otherwise TOML).
Document load_document(const std::filesystem::path& path);

/// Builds and validates ModelParams from a document. Vector fields accept a
/// scalar, broadcast to n_commodities. Unknown keys are rejected.
ModelParams params_from_document(const Document& doc);

ModelParams load_params(const std::filesystem::path& path);
ModelParams parse_params(std::string_view text, DocumentFormat format, std::string source = "<input>");

nlohmann::json params_to_json(const ModelParams& params);
std::string params_to_toml(const ModelParams& params);

}  // namespace statmicro
