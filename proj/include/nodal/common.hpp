#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nodal {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr long double kPiL = 3.141592653589793238462643383279502884L;

// Error taxonomy; the numeric values double as CLI exit codes.
enum class errc : int { validation = 2, numerical = 3, budget = 4 };

class error : public std::runtime_error {
 public:
  error(errc kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  errc kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  errc kind_;
};

[[noreturn]] inline void fail_validation(const std::string& msg) {
  throw error(errc::validation, msg);
}
[[noreturn]] inline void fail_numerical(const std::string& msg) {
  throw error(errc::numerical, msg);
}
[[noreturn]] inline void fail_budget(const std::string& msg) { throw error(errc::budget, msg); }

// |t|^{p-1} t extended by 0 at t=0; p > 1 so no singularity.
inline double odd_pow(double t, double p) {
  if (t == 0.0) return 0.0;
  return std::copysign(std::pow(std::fabs(t), p), t);
}

inline double sq(double x) { return x * x; }

// FNV-1a 64-bit, used to derive content-addressed artifact names.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace nodal
