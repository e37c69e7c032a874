#include "optospike/chr2.hpp"

#include <algorithm>
#include <cmath>

namespace optospike {

namespace {

void check_u(double u) {
  if (!std::isfinite(u) || u < 0.0) throw ContractError("light intensity must be finite and nonnegative");
}

constexpr double kSimplexSlack = 1e-7;

}  // namespace

void validate(const ChR2ThreeParams& p) {
  if (!(p.K_d > 0 && p.K_r > 0 && p.g > 0)) throw ContractError("3-state channel needs K_d, K_r, g_ChR2 > 0");
  if (!std::isfinite(p.V_ChR2)) throw ContractError("V_ChR2 must be finite");
}

void validate(const ChR2FourParams& p) {
  if (!(p.K_d1 > 0 && p.K_d2 > 0 && p.e12 > 0 && p.e21 > 0 && p.K_r > 0 && p.g > 0)) {
    throw ContractError("4-state channel rates and g_ChR2 must be positive");
  }
  if (!(p.rho > 0 && p.rho < 1)) throw ContractError("rho must lie in (0, 1)");
  if (!(p.eps1 > 0 && p.eps1 <= 1 && p.eps2 > 0 && p.eps2 <= 1)) throw ContractError("eps1, eps2 must lie in (0, 1]");
  if (!std::isfinite(p.V_ChR2)) throw ContractError("V_ChR2 must be finite");
}

std::array<double, 2> channel_dynamics_3(double o, double d, double u, const ChR2ThreeParams& p) {
  check_u(u);
  if (o < -kSimplexSlack || d < -kSimplexSlack || o + d > 1.0 + kSimplexSlack) {
    throw ContractError("3-state channel state outside the simplex");
  }
  return {u * (1.0 - o - d) - p.K_d * o, p.K_d * o - p.K_r * d};
}

std::array<double, 3> channel_dynamics_4(double o1, double o2, double c2, double u, const ChR2FourParams& p) {
  check_u(u);
  if (o1 < -kSimplexSlack || o2 < -kSimplexSlack || c2 < -kSimplexSlack || o1 + o2 + c2 > 1.0 + kSimplexSlack) {
    throw ContractError("4-state channel state outside the simplex");
  }
  return {p.eps1 * u * (1.0 - o1 - o2 - c2) - (p.K_d1 + p.e12) * o1 + p.e21 * o2,
          p.eps2 * u * c2 + p.e12 * o1 - (p.K_d2 + p.e21) * o2, p.K_d2 * o2 - (p.eps2 * u + p.K_r) * c2};
}

double photocurrent(const ChR2ThreeParams& p, double o, double v) { return p.g * o * (p.V_ChR2 - v); }

double photocurrent(const ChR2FourParams& p, double o1, double o2, double v) {
  return p.g * (o1 + p.rho * o2) * (p.V_ChR2 - v);
}

ControlledSystem::ControlledSystem(NeuronModel neuron, ChannelParams channel, double u_max)
    : neuron_(std::move(neuron)), channel_(std::move(channel)), u_max_(u_max) {
  if (!(u_max_ > 0) || !std::isfinite(u_max_)) throw ContractError("u_max must be positive and finite");
  if (const auto* p3 = std::get_if<ChR2ThreeParams>(&channel_)) {
    validate(*p3);
    kind_ = ChannelKind::three;
    dim_ = neuron_.dim() + 2;
  } else {
    validate(std::get<ChR2FourParams>(channel_));
    kind_ = ChannelKind::four;
    dim_ = neuron_.dim() + 3;
  }
}

ControlledSystem::ControlledSystem(NeuronModel neuron, ChR2ThreeParams channel)
    : neuron_(std::move(neuron)), channel_(channel), kind_(ChannelKind::reduced), u_max_(1.0), dim_(neuron_.dim()) {}

double ControlledSystem::g() const {
  return std::visit([](const auto& p) { return p.g; }, channel_);
}

double ControlledSystem::v_chr2() const {
  return std::visit([](const auto& p) { return p.V_ChR2; }, channel_);
}

std::vector<std::string> ControlledSystem::state_names() const {
  auto names = neuron_.state_names();
  if (kind_ == ChannelKind::three) {
    names.insert(names.end(), {"o", "d"});
  } else if (kind_ == ChannelKind::four) {
    names.insert(names.end(), {"o1", "o2", "c2"});
  }
  return names;
}

Vec ControlledSystem::dark_rest() const {
  Vec rest = resting_state(neuron_);
  Vec x = Vec::Zero(dim_);
  x.head(neuron_.dim()) = rest;
  return x;
}

ControlledSystem ControlledSystem::with_u_max(double u_max) const {
  if (kind_ == ChannelKind::reduced) throw UnsupportedError("reduced system has a fixed control range [0, 1]");
  return ControlledSystem(neuron_, channel_, u_max);
}

Vec ControlledSystem::eval(const Vec& x, double u) const {
  Vec out = F0<double>(x);
  const int n = neuron_.dim();
  if (kind_ == ChannelKind::three) {
    out[n] += u * (1.0 - x[n] - x[n + 1]);
  } else if (kind_ == ChannelKind::four) {
    const auto& p = *std::get_if<ChR2FourParams>(&channel_);
    out[n] += u * p.eps1 * (1.0 - x[n] - x[n + 1] - x[n + 2]);
    out[n + 1] += u * p.eps2 * x[n + 2];
    out[n + 2] -= u * p.eps2 * x[n + 2];
  } else {
    const auto& p = *std::get_if<ChR2ThreeParams>(&channel_);
    out[0] += u * (p.g / neuron_.capacitance()) * (p.V_ChR2 - x[0]);
  }
  return out;
}

Mat ControlledSystem::J0(const Vec& x) const {
  if (x.size() != dim_) throw ContractError("state dimension mismatch");
  const int n = neuron_.dim();
  const double C = neuron_.capacitance();
  Mat J = Mat::Zero(dim_, dim_);
  Vec xn = x.head(n);
  J.topLeftCorner(n, n) = drift_jacobian(neuron_, xn);
  if (kind_ == ChannelKind::three) {
    const auto& p = std::get<ChR2ThreeParams>(channel_);
    J(0, 0) -= p.g * x[n] / C;
    J(0, n) = p.g * (p.V_ChR2 - x[0]) / C;
    J(n, n) = -p.K_d;
    J(n + 1, n) = p.K_d;
    J(n + 1, n + 1) = -p.K_r;
  } else if (kind_ == ChannelKind::four) {
    const auto& p = std::get<ChR2FourParams>(channel_);
    J(0, 0) -= p.g * (x[n] + p.rho * x[n + 1]) / C;
    J(0, n) = p.g * (p.V_ChR2 - x[0]) / C;
    J(0, n + 1) = p.rho * p.g * (p.V_ChR2 - x[0]) / C;
    J(n, n) = -(p.K_d1 + p.e12);
    J(n, n + 1) = p.e21;
    J(n + 1, n) = p.e12;
    J(n + 1, n + 1) = -(p.K_d2 + p.e21);
    J(n + 2, n + 1) = p.K_d2;
    J(n + 2, n + 2) = -p.K_r;
  }
  return J;
}

Mat ControlledSystem::J1(const Vec& x) const {
  if (x.size() != dim_) throw ContractError("state dimension mismatch");
  const int n = neuron_.dim();
  Mat J = Mat::Zero(dim_, dim_);
  if (kind_ == ChannelKind::three) {
    J(n, n) = -1.0;
    J(n, n + 1) = -1.0;
  } else if (kind_ == ChannelKind::four) {
    const auto& p = std::get<ChR2FourParams>(channel_);
    J(n, n) = J(n, n + 1) = J(n, n + 2) = -p.eps1;
    J(n + 1, n + 2) = p.eps2;
    J(n + 2, n + 2) = -p.eps2;
  } else {
    const auto& p = std::get<ChR2ThreeParams>(channel_);
    J(0, 0) = -p.g / neuron_.capacitance();
  }
  return J;
}

ControlledSystem couple(const NeuronModel& neuron, const ChannelParams& channel, double u_max) {
  return ControlledSystem(neuron, channel, u_max);
}

ControlledSystem goh_reduce(const ControlledSystem& sys) {
  if (sys.channel_kind() != ChannelKind::three) throw UnsupportedError("Goh reduction needs a 3-state coupling");
  return ControlledSystem(sys.neuron(), std::get<ChR2ThreeParams>(sys.channel()));
}

double physiological_umax(double eps, double sigma_ret_um2, double flux_ph_um2_s, double w_loss) {
  if (!(eps >= 0 && sigma_ret_um2 > 0 && flux_ph_um2_s > 0 && w_loss > 0)) {
    throw ContractError("photon-rate inputs must be positive");
  }
  return eps * sigma_ret_um2 * flux_ph_um2_s / w_loss / 1000.0;
}

double simplex_violation(const ControlledSystem& sys, const Vec& x) {
  const int n = sys.neuron_dim();
  double worst = 0.0, total = 0.0;
  for (int i = n; i < sys.dim(); ++i) {
    worst = std::max(worst, -x[i]);
    total += x[i];
  }
  return std::max(worst, total - 1.0);
}

}  // namespace optospike
