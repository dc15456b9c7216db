"""Physical constants used across the solver (SI units)."""

from scipy.constants import c as C0  # vacuum speed of light [m/s]
from scipy.constants import epsilon_0 as EPS0  # vacuum permittivity [F/m]
from scipy.constants import mu_0 as MU0  # vacuum permeability [H/m]

__all__ = ["C0", "EPS0", "MU0"]
