#include "failsearch/cli.hpp"
#include "failsearch/error.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>

namespace failsearch::cli {

int exit_code(const std::exception& e) noexcept {
  const auto* err = dynamic_cast<const Error*>(&e);
  if (!err) return 1;
  switch (err->error_class()) {
    case ErrorClass::Validation: return 2;
    case ErrorClass::Execution: return 3;
    case ErrorClass::Degenerate:
    case ErrorClass::Numeric: return 4;
  }
  return 1;
}

void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw ValidationError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw ValidationError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_atomic(path, doc.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

exec::SutDescriptor make_sut(const SutOptions& o, const config::SchemaPtr& schema) {
  if (o.spec == "synthetic") return exec::synthetic_sut(exec::default_synthetic_params(schema, o.failure_rate, o.noise));
  if (o.spec == "parking") {
    if (schema->name() != "parking") throw SchemaMismatch("the parking SUT needs the parking schema");
    return exec::toy_parking_sut();
  }
  if (o.spec.rfind("exec:", 0) == 0 && o.spec.size() > 5)
    return exec::external_sut(o.spec.substr(5), std::chrono::milliseconds(o.timeout_ms), o.deterministic);
  throw ValidationError("unknown SUT '" + o.spec + "' (want synthetic, parking or exec:<command>)");
}

}  // namespace failsearch::cli
