#pragma once

#include <string>

#include "pgnd/types.hpp"

namespace pgnd {

// Parse a config JSON string / file into RunConfig. Unknown keys are
// rejected (ParamError) so typos never silently fall back to defaults.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string dump_config(const RunConfig& cfg);

// The standard 4-camera rig used when a config supplies no cameras:
// four corners of a square, looking at the workspace center.
std::vector<CameraSpec> default_camera_rig();

// Cameras from cfg, or the default rig when none are configured.
std::vector<CameraSpec> effective_cameras(const RunConfig& cfg);

// Throws ValidationError if numeric fields are out of range.
void validate_config(const RunConfig& cfg);

}  // namespace pgnd
