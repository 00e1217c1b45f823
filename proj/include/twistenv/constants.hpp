#pragma once

/// Physical constants and particle data. Energies and momenta in MeV,
/// lengths in metres, magnetic fields in Tesla, electric fields in MV/m.

namespace twistenv::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

/// hbar*c in MeV*m (197.3269804 MeV*fm).
inline constexpr double hbar_c = 197.3269804e-15;

/// Speed of light, m/s. Exact in SI.
inline constexpr double c_light = 299792458.0;

/// Elementary charge in Coulomb.
inline constexpr double e_charge = 1.602176634e-19;

inline constexpr double electron_mass = 0.51099895;
inline constexpr double proton_mass = 938.27209;

/// e*c*B expressed as momentum per length: MeV/m per Tesla.
inline constexpr double mev_per_m_per_tesla = c_light * 1e-6;

}  // namespace twistenv::constants
