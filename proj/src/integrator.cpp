#include "optospike/integrator.hpp"

#include <algorithm>

namespace optospike {

double BangBangSchedule::level(double t) const {
  auto passed = std::upper_bound(switches.begin(), switches.end(), t) - switches.begin();
  bool on = (passed % 2 == 0) == start_on;
  return on ? u_max : 0.0;
}

void BangBangSchedule::validate() const {
  if (!(u_max > 0) || !std::isfinite(u_max)) throw ContractError("u_max must be positive and finite");
  double prev = 0.0;
  for (std::size_t i = 0; i < switches.size(); ++i) {
    double s = switches[i];
    if (!std::isfinite(s) || s < 0.0 || (i > 0 && !(s > prev))) {
      throw ContractError("switch times must be finite, nonnegative and strictly increasing");
    }
    prev = s;
  }
}

ControlSignal ControlSignal::constant(double u) {
  if (!std::isfinite(u) || u < 0.0) throw ContractError("control level must be finite and nonnegative");
  ControlSignal c;
  c.starts_ = {0.0};
  c.levels_ = {u};
  return c;
}

ControlSignal ControlSignal::bang(const BangBangSchedule& s) {
  s.validate();
  ControlSignal c;
  bool on = s.start_on;
  c.starts_.push_back(0.0);
  c.levels_.push_back(on ? s.u_max : 0.0);
  for (double t : s.switches) {
    on = !on;
    if (t == 0.0) {
      c.levels_.back() = on ? s.u_max : 0.0;
      continue;
    }
    c.starts_.push_back(t);
    c.levels_.push_back(on ? s.u_max : 0.0);
  }
  return c;
}

ControlSignal ControlSignal::sampled(std::vector<double> times, std::vector<double> values) {
  if (times.empty() || times.size() != values.size()) throw ContractError("sampled control needs matching nonempty grids");
  if (times.front() != 0.0) throw ContractError("sampled control must start at t = 0");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0) throw ContractError("control levels must be finite and nonnegative");
    if (i > 0 && !(times[i] > times[i - 1])) throw ContractError("control grid must be strictly increasing");
  }
  ControlSignal c;
  c.starts_ = std::move(times);
  c.levels_ = std::move(values);
  return c;
}

double ControlSignal::value_at(double t) const {
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  std::size_t j = it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
  return levels_[j];
}

}  // namespace optospike
