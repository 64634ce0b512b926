#pragma once

#include <numbers>

namespace qcirc::units {

// CODATA 2018 exact values.
inline constexpr double e = 1.602176634e-19;   // C
inline constexpr double h = 6.62607015e-34;    // J s
inline constexpr double hbar = h / (2.0 * std::numbers::pi);
inline constexpr double Phi0 = h / (2.0 * e);  // Wb
inline constexpr double R_Q = Phi0 / (2.0 * e); // Ohm, = h / 4e^2

inline constexpr double fF = 1e-15;
inline constexpr double pH = 1e-12;
inline constexpr double GHz = 1e9;

// Energy of (2e)^2 / (1 fF), expressed in GHz.
inline constexpr double charge_energy = (2.0 * e) * (2.0 * e) / (fF * h * GHz);
// Energy of Phi0^2 / (1 pH), expressed in GHz.
inline constexpr double flux_energy = Phi0 * Phi0 / (pH * h * GHz);

// Internally flux is in Phi0 and charge in 2e, so [Phi, Q] = i/(2 pi).
inline constexpr double commutator = 1.0 / (2.0 * std::numbers::pi);

// Oscillator impedance sqrt(L/C) in ohms for L in pH and C in fF.
inline constexpr double impedance_unit = 31.622776601683793; // sqrt(1e-12/1e-15)

}  // namespace qcirc::units
