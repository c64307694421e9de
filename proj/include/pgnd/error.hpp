#pragma once

#include <stdexcept>
#include <string>

namespace pgnd {

// Input-side failures (CLI exit code 1): bad files, bad config, bad arguments.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParamError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Scene does not fit the simulation grid (a configuration problem).
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Computation-side failures (CLI exit code 2).
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Simulation or rollout produced non-finite / exploding values.
struct BlowupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrackingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PlanningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pgnd
