#pragma once

#include "failsearch/config/json_io.hpp"

#include <string>

namespace testing_helpers {

inline failsearch::config::SchemaPtr bundled(const std::string& name) {
  return failsearch::config::load_schema(std::string(FAILSEARCH_SCHEMA_DIR) + "/" + name + ".schema.json");
}

}  // namespace testing_helpers
