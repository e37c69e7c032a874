#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "optospike/neuron.hpp"
#include "optospike/types.hpp"

namespace optospike {

struct ChR2ThreeParams {
  double K_d = 0.2;
  double K_r = 0.021;
  double g = 0.65;       // g_ChR2, mS/cm^2
  double V_ChR2 = 60.0;  // mV
};

struct ChR2FourParams {
  double K_d1 = 0.13, K_d2 = 0.025;
  double e12 = 0.053, e21 = 0.023;
  double K_r = 0.004;
  double eps1 = 0.5, eps2 = 0.1;
  double rho = 0.05;
  double g = 0.65;
  double V_ChR2 = 60.0;
};

using ChannelParams = std::variant<ChR2ThreeParams, ChR2FourParams>;

// reduced: the Goh-reduced neuron-only system controlled by the open fraction.
enum class ChannelKind { three, four, reduced };

void validate(const ChR2ThreeParams& p);
void validate(const ChR2FourParams& p);

// (do/dt, dd/dt).
std::array<double, 2> channel_dynamics_3(double o, double d, double u, const ChR2ThreeParams& p);
// (do1/dt, do2/dt, dc2/dt).
std::array<double, 3> channel_dynamics_4(double o1, double o2, double c2, double u, const ChR2FourParams& p);

double photocurrent(const ChR2ThreeParams& p, double o, double v);
double photocurrent(const ChR2FourParams& p, double o1, double o2, double v);

// Single-input affine system x' = F0(x) + u F1(x), u in [0, u_max]. Voltage is coordinate 0.
class ControlledSystem {
 public:
  ControlledSystem(NeuronModel neuron, ChannelParams channel, double u_max);

  int dim() const { return dim_; }
  int neuron_dim() const { return neuron_.dim(); }
  static constexpr int voltage_index() { return 0; }
  ChannelKind channel_kind() const { return kind_; }
  double u_max() const { return u_max_; }
  const NeuronModel& neuron() const { return neuron_; }
  const ChannelParams& channel() const { return channel_; }
  double g() const;
  double v_chr2() const;
  std::vector<std::string> state_names() const;

  // Resting neuron with every channel in the dark-adapted closed state.
  Vec dark_rest() const;
  ControlledSystem with_u_max(double u_max) const;

  template <class T>
  VecT<T> F0(const VecT<T>& x) const;
  template <class T>
  VecT<T> F1(const VecT<T>& x) const;

  Vec eval(const Vec& x, double u) const;
  Mat J0(const Vec& x) const;
  Mat J1(const Vec& x) const;
  Mat jacobian(const Vec& x, double u) const { return J0(x) + u * J1(x); }

 private:
  friend ControlledSystem goh_reduce(const ControlledSystem& sys);
  ControlledSystem(NeuronModel neuron, ChR2ThreeParams channel);

  NeuronModel neuron_;
  ChannelParams channel_;
  ChannelKind kind_;
  double u_max_;
  int dim_;
};

ControlledSystem couple(const NeuronModel& neuron, const ChannelParams& channel, double u_max);

// Neuron-only system with the open fraction o in [0, 1] as control.
ControlledSystem goh_reduce(const ControlledSystem& sys);

// eps * sigma_ret * flux / w_loss converted from s^-1 to ms^-1.
double physiological_umax(double eps, double sigma_ret_um2, double flux_ph_um2_s, double w_loss);

// Largest violation of the channel simplex constraints (0 when inside).
double simplex_violation(const ControlledSystem& sys, const Vec& x);

template <class T>
VecT<T> ControlledSystem::F0(const VecT<T>& x) const {
  const int n = neuron_.dim();
  VecT<T> out(dim_);
  T i_in(0.0);
  if (kind_ == ChannelKind::three) {
    const auto& p = *std::get_if<ChR2ThreeParams>(&channel_);
    const T& o = x[n];
    const T& d = x[n + 1];
    i_in = p.g * o * (p.V_ChR2 - x[0]);
    out[n] = -p.K_d * o;
    out[n + 1] = p.K_d * o - p.K_r * d;
  } else if (kind_ == ChannelKind::four) {
    const auto& p = *std::get_if<ChR2FourParams>(&channel_);
    const T& o1 = x[n];
    const T& o2 = x[n + 1];
    const T& c2 = x[n + 2];
    i_in = p.g * (o1 + p.rho * o2) * (p.V_ChR2 - x[0]);
    out[n] = -(p.K_d1 + p.e12) * o1 + p.e21 * o2;
    out[n + 1] = p.e12 * o1 - (p.K_d2 + p.e21) * o2;
    out[n + 2] = p.K_d2 * o2 - p.K_r * c2;
  }
  neuron_.eval(x.data(), i_in, out.data());
  return out;
}

template <class T>
VecT<T> ControlledSystem::F1(const VecT<T>& x) const {
  const int n = neuron_.dim();
  VecT<T> out(dim_);
  for (int i = 0; i < dim_; ++i) out[i] = T(0.0);
  if (kind_ == ChannelKind::three) {
    out[n] = 1.0 - x[n] - x[n + 1];
  } else if (kind_ == ChannelKind::four) {
    const auto& p = *std::get_if<ChR2FourParams>(&channel_);
    out[n] = p.eps1 * (1.0 - x[n] - x[n + 1] - x[n + 2]);
    out[n + 1] = p.eps2 * x[n + 2];
    out[n + 2] = -p.eps2 * x[n + 2];
  } else {
    const auto& p = *std::get_if<ChR2ThreeParams>(&channel_);
    out[0] = (p.g / neuron_.capacitance()) * (p.V_ChR2 - x[0]);
  }
  return out;
}

}  // namespace optospike
