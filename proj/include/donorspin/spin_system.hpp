#pragma once

// Physical description of one paramagnetic species: electron spin S, nuclear
// spin I, isotropic hyperfine constant A (MHz) and the two g-factors.

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace donorspin {

struct SpinSystem {
  std::string name;
  double S = 0.5;   // electron spin quantum number (half-integer)
  double I = 0.0;   // nuclear spin quantum number (half-integer)
  double A = 0.0;   // isotropic hyperfine constant, MHz
  double g_e = 2.0; // electron g-factor
  double g_n = 0.0; // nuclear g-factor (sign convention follows the Hamiltonian as written)

  int dimension() const {
    return static_cast<int>(std::lround((2.0 * S + 1.0) * (2.0 * I + 1.0)));
  }

  // A spin quantum number is valid when 2s is a non-negative integer.
  static bool valid_spin(double s) {
    if (!(s >= 0.0) || !std::isfinite(s)) return false;
    const double two_s = 2.0 * s;
    return std::abs(two_s - std::lround(two_s)) < 1e-9;
  }

  void validate() const {
    if (!valid_spin(S)) throw std::invalid_argument("invalid electron spin S = " + std::to_string(S));
    if (!valid_spin(I)) throw std::invalid_argument("invalid nuclear spin I = " + std::to_string(I));
    if (!(A >= 0.0) || !std::isfinite(A)) throw std::invalid_argument("hyperfine constant A must be >= 0");
    if (!std::isfinite(g_e) || !std::isfinite(g_n)) throw std::invalid_argument("non-finite g-factor");
  }

  // Hyperfine coupling is meaningless without a nuclear spin; treat A as zero.
  double effective_A() const { return I > 0.0 ? A : 0.0; }
};

// 75As donor in silicon: S=1/2, I=3/2, A=198.4 MHz, g_e=1.99837, g_n=0.959.
inline SpinSystem as75() { return SpinSystem{"As75", 0.5, 1.5, 198.4, 1.99837, 0.959}; }

// Pb0 dangling-bond centre at the Si/SiO2 interface: electron-only, g ~ 2.
inline SpinSystem pb0() { return SpinSystem{"Pb0", 0.5, 0.0, 0.0, 2.0, 0.0}; }

// Build a SpinSystem from parsed key=value pairs
// (keys: name, S, I, A_MHz, g_e, g_n; spins as decimals, e.g. I = 1.5).
inline SpinSystem spin_system_from_kv(const std::map<std::string, std::string>& kv) {
  SpinSystem sys;
  auto get = [&kv](const std::string& key, bool required) -> const std::string* {
    auto it = kv.find(key);
    if (it == kv.end()) {
      if (required) throw std::invalid_argument("spin system config missing key '" + key + "'");
      return nullptr;
    }
    return &it->second;
  };
  auto num = [](const std::string& key, const std::string& text) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("spin system config: bad numeric value for '" + key + "': " + text);
    }
  };
  if (const auto* v = get("name", false)) sys.name = *v;
  sys.S = num("S", *get("S", true));
  sys.I = num("I", *get("I", true));
  if (const auto* v = get("A_MHz", false)) sys.A = num("A_MHz", *v);
  sys.g_e = num("g_e", *get("g_e", true));
  if (const auto* v = get("g_n", false)) sys.g_n = num("g_n", *v);
  sys.validate();
  return sys;
}

}  // namespace donorspin
