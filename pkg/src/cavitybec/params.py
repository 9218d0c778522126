"""Physical and numerical parameters in dimensionless recoil units.

All quantities are expressed with ``hbar = 1``, frequencies in units of the
recoil frequency ``omega_R`` and positions as the dimensionless phase
``x = k * x_phys`` running over one lattice period ``[0, pi)``.  Conversion
to laboratory units only happens at the output boundary through
:func:`to_hz` / :func:`from_hz`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import scipy.constants as const

__all__ = [
    "PhysicalParams",
    "GridConfig",
    "PERIOD",
    "validate",
    "validate_grid",
    "swave_frequency",
    "to_hz",
    "from_hz",
    "read_config",
    "RB87_MASS",
]

#: Length of one lattice period in the dimensionless coordinate ``k x``.
PERIOD = math.pi

#: Mass of a rubidium-87 atom in kg.
RB87_MASS = 86.909180527 * const.atomic_mass


@dataclass(frozen=True)
class PhysicalParams:
    """Control parameters of the driven cavity + condensate system.

    Frequencies are in units of the recoil frequency.  The defaults are the
    rubidium experiment values used for the weak-drive resonance curve.

    Parameters
    ----------
    n_atoms : float
        Number of condensed atoms ``N``.
    u0 : float
        Single-atom light shift ``U_0``.
    kappa : float
        Cavity amplitude decay rate (half linewidth).
    delta_c : float
        Pump-cavity detuning ``Delta_C``.
    eta : float
        Pump amplitude.
    g_coll : float
        Dimensionless 1-D contact coupling.  Enters the mean-field equation
        as ``pi * g_coll * |phi|^2`` on the grid, i.e. as
        ``g_coll * sum(beta beta beta)`` in the plane-wave basis.
    omega_r_hz : float
        Recoil frequency ``omega_R / 2 pi`` in Hz, used only by
        :func:`to_hz` and :func:`from_hz`.
    """

    n_atoms: float = 6.0e4
    u0: float = 0.96
    kappa: float = 363.9
    delta_c: float = 28000.0
    eta: float = 80.06
    g_coll: float = 0.0
    omega_r_hz: float = 3570.0

    def __post_init__(self):
        validate(self)

    def replace(self, **changes) -> "PhysicalParams":
        """Return a copy with some fields replaced (and re-validated)."""
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "PhysicalParams":
        """Build parameters from a mapping of field names to values.

        Values may be strings (as read from a config file).  Unknown keys
        raise :class:`ValueError`.
        """
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        values = {}
        for key, value in mapping.items():
            try:
                values[key] = float(value)
            except (TypeError, ValueError):
                raise ValueError(f"{key} must be a number, got {value!r}") from None
        return cls(**values)


@dataclass(frozen=True)
class GridConfig:
    """Discretisation settings for the spatially resolved solvers.

    Parameters
    ----------
    n_points : int
        Number of uniformly spaced samples over one period (periodic).
    n_fourier : int
        Plane-wave cutoff ``n_max`` of the Fourier solver; amplitudes
        ``beta_n`` with ``|n| <= n_max`` are kept.
    """

    n_points: int = 200
    n_fourier: int = 8

    def __post_init__(self):
        validate_grid(self)

    @property
    def dx(self) -> float:
        return PERIOD / self.n_points

    @property
    def x(self):
        import numpy as np

        return np.arange(self.n_points) * self.dx


def _require_finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite")


def validate(params: PhysicalParams) -> PhysicalParams:
    """Check the invariants of ``params`` and return it unchanged.

    Raises
    ------
    ValueError
        With a message naming the offending field.
    """
    for name in ("n_atoms", "u0", "kappa", "delta_c", "eta", "g_coll", "omega_r_hz"):
        _require_finite(name, getattr(params, name))
    if params.n_atoms < 1:
        raise ValueError("n_atoms must be at least 1")
    if params.kappa <= 0:
        raise ValueError("kappa must be positive")
    if params.eta < 0:
        raise ValueError("eta must be nonnegative")
    if params.omega_r_hz <= 0:
        raise ValueError("omega_r_hz must be positive")
    return params


def validate_grid(grid: GridConfig) -> GridConfig:
    """Check the invariants of a :class:`GridConfig` and return it."""
    if int(grid.n_points) != grid.n_points or grid.n_points < 16 or grid.n_points % 2:
        raise ValueError("n_points must be an even integer >= 16")
    if int(grid.n_fourier) != grid.n_fourier or grid.n_fourier < 1:
        raise ValueError("n_fourier must be an integer >= 1")
    return grid


def to_hz(value, params: PhysicalParams):
    """Convert a frequency in recoil units to ``omega / 2 pi`` in Hz."""
    return value * params.omega_r_hz


def from_hz(value_hz, params: PhysicalParams):
    """Inverse of :func:`to_hz`."""
    return value_hz / params.omega_r_hz


def swave_frequency(a_scatter, n_atoms, period, n_wells, waist, mass=RB87_MASS):
    """Characteristic collision frequency of the condensate in the lattice.

    Evaluates ``omega_sw = 4 pi hbar a N / (L p w^2 m)`` in SI units.

    Parameters
    ----------
    a_scatter : float
        s-wave scattering length in m.
    n_atoms : float
        Atom number.
    period : float
        Lattice period ``L`` (half the optical wavelength) in m.
    n_wells : float
        Number of occupied lattice wells ``p``.
    waist : float
        Cavity mode waist ``w`` in m.
    mass : float, optional
        Atomic mass in kg (rubidium-87 by default).

    Returns
    -------
    float
        ``omega_sw / 2 pi`` in Hz, i.e. an ordinary frequency.
    """
    for name, value in (("a_scatter", a_scatter), ("period", period),
                        ("n_wells", n_wells), ("waist", waist), ("mass", mass)):
        if not value > 0:
            raise ValueError(f"{name} must be positive")
    if n_atoms < 0:
        raise ValueError("n_atoms must be nonnegative")
    omega = 4 * math.pi * const.hbar * a_scatter * n_atoms / (period * n_wells * waist**2 * mass)
    return omega / (2 * math.pi)


def read_config(path) -> dict[str, str]:
    """Read a flat ``key = value`` configuration file.

    Blank lines and lines starting with ``#`` are ignored; inline comments
    after ``#`` are stripped.  Duplicate keys raise :class:`ValueError`.
    """
    entries: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"{path}:{lineno}: empty key")
        if key in entries:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries
