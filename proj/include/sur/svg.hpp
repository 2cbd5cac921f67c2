#pragma once

#include <string>
#include <vector>

#include "sur/json_io.hpp"
#include "sur/trainer.hpp"

namespace sur {

// One panel per loss column, each on its own vertical scale.
std::string loss_curve_svg(const std::vector<TrainRecord>& log);

// Grouped bars of per-category accuracy plus the mean paired CLIP scores.
std::string report_svg(const Json& report);

}  // namespace sur
