#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace optospike {

// Largest coupled system is HH + 4-state channel (7 states).
inline constexpr int kMaxDim = 7;

template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Vec = VecT<double>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Integration produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double last_time) : Error(what), last_time_(last_time) {}
  double last_time() const { return last_time_; }

 private:
  double last_time_;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Target threshold cannot be reached by any tried control.
class UnreachableError : public Error {
 public:
  using Error::Error;
};

}  // namespace optospike
