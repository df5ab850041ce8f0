#pragma once

#include "json.hpp"
#include "llmopt/core.hpp"

namespace llmopt {

nlohmann::json to_json(const Solution& s);
Solution solution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const nlohmann::json& j);

}  // namespace llmopt
