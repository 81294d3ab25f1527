#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "monest/types.hpp"

namespace monest {

struct VectorField {
  std::size_t dimension = 0;
  std::function<Vector(double t, const Vector& x)> rhs;
};

enum class Direction { rising, falling, any };
enum class EventAction { record, stop, toggle };

struct EventSpec {
  std::string id;
  std::function<double(double t, const Vector& x)> guard;
  Direction direction = Direction::any;
  EventAction action = EventAction::record;
  // Called for toggle events with the localized time and state; may edit the state.
  std::function<void(double t, Vector& x)> on_toggle;
};

struct EventRecord {
  double time = 0.0;
  std::string id;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> samples;
  std::vector<EventRecord> events;
};

struct IntegrateOptions {
  std::size_t max_steps = 100'000'000;
  // Keep every k-th grid sample; the first, the last and all event samples are always kept.
  std::size_t record_stride = 1;
  // Invoked at the start of every grid step (sample-and-hold controllers).
  std::function<void(double t, const Vector& x)> pre_step;
  // Invoked for every recorded sample, after any toggle action at that instant.
  std::function<void(double t, const Vector& x)> observer;
};

Vector rk4_step(const VectorField& field, double t, const Vector& x, double h);

Trajectory integrate(const VectorField& field, const Vector& x0, double t0, double tf, double h,
                     std::span<const EventSpec> events = {}, const IntegrateOptions& options = {});

double impulse_train(double t, double delay, double period, double width);

}  // namespace monest
