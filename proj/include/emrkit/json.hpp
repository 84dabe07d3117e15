#pragma once

#include <json.hpp>

namespace emrkit {

// Ordered so every serialization is byte-stable across runs.
using Json = nlohmann::ordered_json;

}  // namespace emrkit
