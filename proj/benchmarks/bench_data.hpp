#pragma once

#include <string>

#include "skytalk/scene.hpp"

inline skytalk::Scene bench_scene(const std::string& name = "lake_occluded") {
  return skytalk::load_scene_file(std::string(SKYTALK_DATA_DIR) + "/scenes/" + name + ".json");
}
