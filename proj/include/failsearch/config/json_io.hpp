#pragma once

#include "failsearch/config/configuration.hpp"

#include <filesystem>
#include <json.hpp>

namespace failsearch::config {

SchemaPtr schema_from_json(const nlohmann::json& doc);
SchemaPtr load_schema(const std::filesystem::path& path);

// Configurations serialize as objects keyed by parameter name.
nlohmann::json to_json(const EnvConfiguration& config);
EnvConfiguration config_from_json(const SchemaPtr& schema, const nlohmann::json& doc,
                                  Provenance provenance = Provenance::Random);

}  // namespace failsearch::config
