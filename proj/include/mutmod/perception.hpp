#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mutmod/model_store.hpp"

namespace mutmod {

using PayloadValue = std::variant<double, std::string>;

struct RawEvent {
  VirtualTime timestamp = 0;
  std::string sensor;
  std::map<std::string, PayloadValue> payload;
};

using Vec3 = std::array<double, 3>;

struct Bin {
  double upper_bound;  // inclusive; the last bin must be +inf
  std::string label;
};

/// Label of the first bin whose upper bound is >= x.
std::string discretize(double x, const std::vector<Bin>& bins);
void validate_bins(const std::vector<Bin>& bins);

struct SceneObject {
  std::string label;
  Vec3 position{};  // metres, same frame as the gaze origin
  double radius = 0.0;
};

struct GazeScene {
  Vec3 origin{0.0, 0.0, 0.0};
  Vec3 gaze_direction{1.0, 0.0, 0.0};  // unit vector
  std::vector<SceneObject> objects;
  double threshold_deg = 10.0;

  void validate() const;  // throws InvalidScene
};

inline constexpr std::string_view kElsewhere = "elsewhere";

/// Angle in degrees between the gaze ray and the direction to `object`.
double gaze_angle_deg(const GazeScene& scene, const SceneObject& object);

/// Object closest in angle to the gaze ray if within threshold, ties to the
/// lexicographically smallest label; otherwise "elsewhere".
std::string estimate_gaze_target(const GazeScene& scene);

enum class BindingKind { Categorical, Discretized, Gaze };

/// Maps one payload field of one sensor onto a perceived variable.
/// Gaze bindings read the direction from fields dx, dy, dz (and optionally
/// an origin from ox, oy, oz) and classify it against `objects`.
struct SensorBinding {
  std::string sensor;
  std::string field;
  SlotKey target;
  BindingKind kind = BindingKind::Categorical;
  std::vector<Bin> bins;
  std::vector<SceneObject> objects;
  double threshold_deg = 10.0;
};

struct IngestResult {
  std::vector<SlotKey> committed;
  std::vector<SlotKey> changed;
};

class Perception {
 public:
  Perception() = default;
  explicit Perception(std::vector<SensorBinding> bindings);

  void add_binding(SensorBinding binding);
  const std::vector<SensorBinding>& bindings() const { return bindings_; }

  /// Checks every binding against the declared variables in `store`.
  void validate(const ModelStore& store) const;

  /// Validates all bound fields first, then commits them with
  /// source=perception. Events from unbound sensors are counted and dropped.
  IngestResult ingest(const RawEvent& event, ModelStore& store);

  std::uint64_t unbound_count() const { return unbound_; }

 private:
  std::string label_for(const SensorBinding& binding, const RawEvent& event,
                        const VariableSpec& spec) const;

  std::vector<SensorBinding> bindings_;
  std::uint64_t unbound_ = 0;
};

}  // namespace mutmod
