"""Physical constants and unit conversions used across the package.

Energies are carried as frequencies (E/h, in Hz) and rates as their /2pi
values in Hz.  Conversion to angular units happens only inside the
transmission formulas.
"""
from scipy import constants as _c

H = _c.h
HBAR = _c.hbar
KB = _c.k
E_CHARGE = _c.e
M_E = _c.m_e
EPS0 = _c.epsilon_0
PHI0 = _c.h / (2 * _c.e)

TWO_PI = 2.0 * _c.pi

#: 1 eV expressed as a frequency E/h (Hz).
EV_TO_HZ = _c.e / _c.h
