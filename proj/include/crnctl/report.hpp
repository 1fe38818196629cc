#pragma once

// =============================================================================
// Serialisation of compiled artefacts
// =============================================================================

#include "crnctl/crn.hpp"

#include <json.hpp>

namespace crnctl {

nlohmann::json matrix_to_json(const Matrix &M);
nlohmann::json vector_to_json(const Vector &v);

/// Species order, reactions and every structured matrix (A, B, P, blocks, R).
nlohmann::json structure_to_json(const Crn &crn, const StructuredSystem &sys);

/// Pretty JSON with a trailing newline; stable key order.
std::string dump(const nlohmann::json &doc);

} // namespace crnctl
