#include "mutmod/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mutmod/error.hpp"

namespace mutmod {

void validate_bins(const std::vector<Bin>& bins) {
  if (bins.empty()) throw Error(ErrorCode::EmptyBins, "discretization needs at least one bin");
  for (std::size_t i = 1; i < bins.size(); ++i)
    if (!(bins[i].upper_bound > bins[i - 1].upper_bound))
      throw Error(ErrorCode::NonMonotonicBins,
                  "bin upper bounds must be strictly increasing (bin " + std::to_string(i) + ")");
  if (bins.back().upper_bound != std::numeric_limits<double>::infinity())
    throw Error(ErrorCode::NonMonotonicBins, "last bin upper bound must be +inf");
}

std::string discretize(double x, const std::vector<Bin>& bins) {
  validate_bins(bins);
  if (std::isnan(x)) throw Error(ErrorCode::InvalidArgument, "cannot discretize NaN");
  for (const auto& bin : bins)
    if (x <= bin.upper_bound) return bin.label;
  return bins.back().label;
}

namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Labels whose angles differ by less than this are tied.
constexpr double kTieEpsilonDeg = 1e-9;

}  // namespace

void GazeScene::validate() const {
  if (std::abs(norm(gaze_direction) - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidScene, "gaze direction must be a unit vector");
  if (!(threshold_deg >= 0.0))
    throw Error(ErrorCode::InvalidScene, "threshold must be non-negative");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& obj = objects[i];
    if (!(obj.radius > 0.0))
      throw Error(ErrorCode::InvalidScene, "object '" + obj.label + "' needs a positive radius");
    Vec3 rel{obj.position[0] - origin[0], obj.position[1] - origin[1], obj.position[2] - origin[2]};
    if (norm(rel) == 0.0)
      throw Error(ErrorCode::InvalidScene, "object '" + obj.label + "' sits at the gaze origin");
    for (std::size_t j = 0; j < i; ++j)
      if (objects[j].label == obj.label)
        throw Error(ErrorCode::InvalidScene, "duplicate object label '" + obj.label + "'");
  }
}

double gaze_angle_deg(const GazeScene& scene, const SceneObject& object) {
  Vec3 rel{object.position[0] - scene.origin[0], object.position[1] - scene.origin[1],
           object.position[2] - scene.origin[2]};
  double c = dot(scene.gaze_direction, rel) / (norm(scene.gaze_direction) * norm(rel));
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

std::string estimate_gaze_target(const GazeScene& scene) {
  scene.validate();
  const SceneObject* best = nullptr;
  double best_angle = std::numeric_limits<double>::infinity();
  for (const auto& obj : scene.objects) {
    double angle = gaze_angle_deg(scene, obj);
    if (angle > scene.threshold_deg) continue;
    if (!best || angle < best_angle - kTieEpsilonDeg ||
        (std::abs(angle - best_angle) <= kTieEpsilonDeg && obj.label < best->label)) {
      if (!best || angle < best_angle) best_angle = angle;
      best = &obj;
    }
  }
  return best ? best->label : std::string(kElsewhere);
}

Perception::Perception(std::vector<SensorBinding> bindings) {
  for (auto& b : bindings) add_binding(std::move(b));
}

void Perception::add_binding(SensorBinding binding) {
  if (!is_token(binding.sensor))
    throw Error(ErrorCode::ValidationError, "binding sensor '" + binding.sensor + "' is not a token");
  if (binding.kind == BindingKind::Discretized) validate_bins(binding.bins);
  if (binding.kind == BindingKind::Gaze) {
    GazeScene probe;
    probe.objects = binding.objects;
    probe.threshold_deg = binding.threshold_deg;
    probe.validate();
  }
  bindings_.push_back(std::move(binding));
}

void Perception::validate(const ModelStore& store) const {
  for (const auto& b : bindings_) {
    const auto* spec = store.find_spec(b.target);
    if (!spec)
      throw Error(ErrorCode::ValidationError,
                  "binding for sensor '" + b.sensor + "' targets undeclared " + b.target.to_string());
    if (spec->kind != VariableKind::Perceived)
      throw Error(ErrorCode::ValidationError,
                  "binding for sensor '" + b.sensor + "' targets abstract " + b.target.to_string());
    auto require = [&](const std::string& label) {
      if (!spec->index_of(label))
        throw Error(ErrorCode::ValidationError, "binding for sensor '" + b.sensor +
                                                    "' produces label '" + label +
                                                    "' outside " + b.target.to_string());
    };
    if (b.kind == BindingKind::Discretized)
      for (const auto& bin : b.bins) require(bin.label);
    if (b.kind == BindingKind::Gaze) {
      for (const auto& obj : b.objects) require(obj.label);
      require(std::string(kElsewhere));
    }
  }
}

std::string Perception::label_for(const SensorBinding& b, const RawEvent& event,
                                  const VariableSpec& spec) const {
  auto field = [&](const std::string& name) -> const PayloadValue& {
    auto it = event.payload.find(name);
    if (it == event.payload.end())
      throw Error(ErrorCode::MissingPayloadField,
                  "sensor '" + event.sensor + "' event lacks field '" + name + "'");
    return it->second;
  };
  auto number = [&](const std::string& name) {
    const auto& v = field(name);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw Error(ErrorCode::PayloadOutOfDomain,
                "sensor '" + event.sensor + "' field '" + name + "' must be numeric");
  };

  std::string label;
  switch (b.kind) {
    case BindingKind::Categorical: {
      const auto& v = field(b.field);
      const auto* s = std::get_if<std::string>(&v);
      if (!s)
        throw Error(ErrorCode::PayloadOutOfDomain,
                    "sensor '" + event.sensor + "' field '" + b.field + "' must be a label");
      label = *s;
      break;
    }
    case BindingKind::Discretized:
      label = discretize(number(b.field), b.bins);
      break;
    case BindingKind::Gaze: {
      GazeScene scene;
      scene.gaze_direction = {number("dx"), number("dy"), number("dz")};
      double n = norm(scene.gaze_direction);
      if (!(n > 0.0))
        throw Error(ErrorCode::PayloadOutOfDomain, "gaze direction must be non-zero");
      for (auto& c : scene.gaze_direction) c /= n;
      if (event.payload.count("ox")) scene.origin = {number("ox"), number("oy"), number("oz")};
      scene.objects = b.objects;
      scene.threshold_deg = b.threshold_deg;
      label = estimate_gaze_target(scene);
      break;
    }
  }
  if (!spec.index_of(label))
    throw Error(ErrorCode::PayloadOutOfDomain,
                "label '" + label + "' from sensor '" + event.sensor + "' is outside " +
                    b.target.to_string());
  return label;
}

IngestResult Perception::ingest(const RawEvent& event, ModelStore& store) {
  std::vector<std::pair<const SensorBinding*, std::string>> pending;
  for (const auto& b : bindings_) {
    if (b.sensor != event.sensor) continue;
    pending.emplace_back(&b, label_for(b, event, store.spec(b.target)));
  }
  IngestResult result;
  if (pending.empty()) {
    ++unbound_;
    return result;
  }
  for (const auto& [b, label] : pending) {
    auto r = store.commit_value(b->target, label, event.timestamp, ValueSource::Perception);
    result.committed.push_back(b->target);
    if (r.changed) result.changed.push_back(b->target);
  }
  return result;
}

}  // namespace mutmod
