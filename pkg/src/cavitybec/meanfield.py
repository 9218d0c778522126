"""Self-consistent mean-field states of the condensate in the driven cavity.

The cavity amplitude is adiabatically eliminated, so the condensate obeys a
nonlinear Schroedinger equation whose potential depends on the light shift
``<U>`` of the condensate itself::

    alpha = i eta / (Delta_C - N <U> + i kappa)
    mu phi = [-d^2/dx^2 + V_ext + |alpha|^2 U0 cos^2 x + pi g |phi|^2] phi

Three representations are provided:

* ``grid`` -- samples of ``phi`` on a uniform periodic grid over one period,
  relaxed by preconditioned imaginary-time propagation;
* ``fourier`` -- plane-wave amplitudes ``beta_n`` with ``|n| <= n_max``,
  relaxed with the same scheme;
* ``two_mode`` -- the pair ``(beta_0, beta_1)`` of the homogeneous and the
  ``sqrt(2) cos 2x`` modes, solved exactly through the response curve.

Imaginary-time propagation is a gradient flow on the energy functional
:func:`energy_functional`; at fixed detuning it relaxes to a local minimum.
The two-mode solver reproduces that selection rule analytically, so warm
starts pick the same branch in every representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .exceptions import ConvergenceError
from .io import write_csv
from .params import PERIOD, GridConfig, PhysicalParams

__all__ = [
    "Representation",
    "MeanFieldState",
    "Branch",
    "cavity_steady_field",
    "light_shift_expectation",
    "light_shift_matrix",
    "two_mode_light_shift",
    "energy_functional",
    "solve_gpe_grid",
    "solve_gpe_fourier",
    "solve_two_mode",
    "solve",
    "two_mode_folds",
    "continue_branch",
    "branch_rows",
    "write_branch_csv",
    "BRANCH_COLUMNS",
]

SQRT2 = math.sqrt(2.0)


class Representation(str, Enum):
    """Basis in which the condensate wavefunction is represented."""

    GRID = "grid"
    FOURIER = "fourier"
    TWO_MODE = "two_mode"


@dataclass
class MeanFieldState:
    """Converged (or last-iterate) mean-field solution.

    Attributes
    ----------
    representation : Representation
    psi : ndarray
        Grid samples of ``phi`` (normalised with weight ``dx``), Fourier
        amplitudes ``beta_n`` ordered ``n = -n_max..n_max``, or
        ``(beta_0, beta_1)``.
    alpha_ss : complex
        Steady cavity amplitude consistent with ``mean_u``.
    mu : float
        Chemical potential (Rayleigh quotient of the mean-field operator).
    mean_u : float
        Light shift expectation ``<U>``.
    converged : bool
    residual : float
        Final residual of the solver (imaginary-time rate for the iterative
        solvers, ``||K beta||`` for the two-mode solver).
    params : PhysicalParams
        Parameters the state was computed for.
    iterations : int
    energy_history : ndarray or None
        Energy functional after every accepted imaginary-time step, if
        recording was requested.
    """

    representation: Representation
    psi: np.ndarray
    alpha_ss: complex
    mu: float
    mean_u: float
    converged: bool
    residual: float
    params: PhysicalParams
    iterations: int = 0
    energy_history: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def photon_number(self) -> float:
        """Mean intracavity photon number ``|alpha_ss|^2``."""
        return abs(self.alpha_ss) ** 2

    @property
    def delta_eff(self) -> float:
        """Effective detuning ``delta = Delta_C - N <U>``."""
        return self.params.delta_c - self.params.n_atoms * self.mean_u

    def plane_wave_amplitudes(self, n_max: int | None = None) -> np.ndarray:
        """Amplitudes ``c_n`` of ``exp(2 i n x)/sqrt(pi)``, ``n = -n_max..n_max``."""
        return _plane_wave_amplitudes(self, n_max)

    @property
    def beta1_sq(self) -> float:
        """Population of the ``|n| = 1`` plane waves (the ``cos 2x`` mode)."""
        if self.representation is Representation.TWO_MODE:
            return float(self.psi[1] ** 2)
        c = self.plane_wave_amplitudes(1)
        return float(abs(c[0]) ** 2 + abs(c[2]) ** 2)


@dataclass
class Branch:
    """States obtained by continuation along a detuning sweep.

    Attributes
    ----------
    direction : {"up", "down"}
    representation : Representation
    delta_c : ndarray
        Strictly monotone detunings of the converged states.
    states : list of MeanFieldState
    endpoint : float or None
        Last detuning (refined by bisection) at which the branch still
        exists before the photon number jumps; ``None`` if no jump occurred
        inside the sweep range.
    endpoint_state : MeanFieldState or None
        State at ``endpoint``.
    jump_delta : float or None
        First detuning beyond the jump (``endpoint`` + bracket width).
    failures : list of (float, str)
        Detunings at which the solver failed, with the error message.
    labels : list of str or None
        Per-state stability label (``"cooling"`` / ``"heating"``), filled in
        by the sweep module from the fluctuation spectrum.
    """

    direction: str
    representation: Representation
    delta_c: np.ndarray
    states: list
    endpoint: Optional[float] = None
    endpoint_state: Optional[MeanFieldState] = None
    jump_delta: Optional[float] = None
    failures: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    _solve: Optional[Callable] = field(default=None, repr=False, compare=False)
    _jump_threshold: float = field(default=0.25, repr=False)

    @property
    def photon_number(self) -> np.ndarray:
        return np.array([s.photon_number for s in self.states])

    def __len__(self):
        return len(self.states)


# ---------------------------------------------------------------------------
# Basic relations
# ---------------------------------------------------------------------------

def cavity_steady_field(params: PhysicalParams, mean_u: float) -> complex:
    """Adiabatic cavity amplitude ``i eta / (Delta_C - N <U> + i kappa)``."""
    delta = params.delta_c - params.n_atoms * mean_u
    return 1j * params.eta / (delta + 1j * params.kappa)


def light_shift_matrix(n_max: int) -> np.ndarray:
    """Matrix of ``cos^2 x`` between plane waves ``exp(2 i n x)/sqrt(pi)``.

    Diagonal ``1/2``, first off-diagonals ``1/4``; size ``2 n_max + 1``.
    """
    size = 2 * n_max + 1
    return 0.5 * np.eye(size) + 0.25 * (np.eye(size, k=1) + np.eye(size, k=-1))


def two_mode_light_shift(u0: float) -> np.ndarray:
    """``U(x)`` in the basis ``(1/sqrt(pi), sqrt(2/pi) cos 2x)``."""
    return 0.5 * u0 * np.array([[1.0, 1.0 / SQRT2], [1.0 / SQRT2, 1.0]])


def _potential_profile(u0: float, x: np.ndarray) -> np.ndarray:
    return u0 * np.cos(x) ** 2


def light_shift_expectation(state: MeanFieldState, u0: float) -> float:
    """Light-shift expectation value ``<U> = int |phi|^2 U0 cos^2 x dx``."""
    psi = state.psi
    if state.representation is Representation.GRID:
        n = psi.size
        dx = PERIOD / n
        x = np.arange(n) * dx
        return float(np.sum(_potential_profile(u0, x) * np.abs(psi) ** 2) * dx)
    if state.representation is Representation.FOURIER:
        n_max = (psi.size - 1) // 2
        return float(u0 * psi @ light_shift_matrix(n_max) @ psi)
    return float(0.5 * u0 * (1.0 + SQRT2 * psi[0] * psi[1]))


def _cavity_potential(params: PhysicalParams, s: float) -> float:
    """Antiderivative of ``|alpha|^2`` with respect to ``s = N <U>``.

    ``d/ds [(eta^2/kappa) arctan((s - Delta_C)/kappa)] = |alpha(s)|^2``.
    """
    return params.eta**2 / params.kappa * math.atan((s - params.delta_c) / params.kappa)


# ---------------------------------------------------------------------------
# Representation conversions
# ---------------------------------------------------------------------------

def _plane_wave_amplitudes(state: MeanFieldState, n_max: int | None) -> np.ndarray:
    psi = state.psi
    if state.representation is Representation.TWO_MODE:
        full = np.array([psi[1] / SQRT2, psi[0], psi[1] / SQRT2])
    elif state.representation is Representation.FOURIER:
        full = np.asarray(psi, dtype=float)
    else:
        n = psi.size
        coeffs = np.fft.fft(psi) * math.sqrt(PERIOD) / n
        m = (n - 1) // 2 if n_max is None else min(n_max, n // 2 - 1)
        idx = np.arange(-m, m + 1)
        full = coeffs[idx % n]
        if np.allclose(full.imag, 0.0, atol=1e-14):
            full = full.real
    m_have = (full.size - 1) // 2
    if n_max is None:
        return full
    out = np.zeros(2 * n_max + 1, dtype=full.dtype)
    k = min(n_max, m_have)
    out[n_max - k:n_max + k + 1] = full[m_have - k:m_have + k + 1]
    return out


def _to_grid(state: MeanFieldState, n_points: int) -> np.ndarray:
    if state.representation is Representation.GRID and state.psi.size == n_points:
        return np.array(state.psi, dtype=float)
    c = _plane_wave_amplitudes(state, None)
    m = (c.size - 1) // 2
    x = np.arange(n_points) * (PERIOD / n_points)
    n = np.arange(-m, m + 1)
    phi = (np.exp(2j * np.outer(x, n)) @ c).real / math.sqrt(PERIOD)
    return phi


def _to_fourier(state: MeanFieldState, n_max: int) -> np.ndarray:
    c = _plane_wave_amplitudes(state, n_max)
    return np.real(c).astype(float)


# ---------------------------------------------------------------------------
# Imaginary-time propagation (grid and Fourier)
# ---------------------------------------------------------------------------

class _GridProblem:
    """Operators of the mean-field problem on a periodic grid."""

    def __init__(self, params: PhysicalParams, n_points: int, v_ext):
        self.params = params
        self.n = n_points
        self.dx = PERIOD / n_points
        self.x = np.arange(n_points) * self.dx
        self.u = _potential_profile(params.u0, self.x)
        self.v_ext = np.zeros(n_points) if v_ext is None else np.asarray(v_ext, dtype=float)
        if self.v_ext.shape != (n_points,):
            raise ValueError(f"v_ext must have shape ({n_points},)")
        # wave numbers of exp(2 i m x) modes: k = 2m
        self.k2 = (2.0 * np.fft.rfftfreq(n_points, d=1.0 / n_points)) ** 2
        self.g = math.pi * params.g_coll

    def dot(self, a, b):
        return float(np.dot(a, b) * self.dx)

    def kinetic(self, v):
        return np.fft.irfft(self.k2 * np.fft.rfft(v), n=self.n)

    def kinetic_energy(self, v):
        return self.dot(v, self.kinetic(v))

    def precondition(self, v, dt):
        return np.fft.irfft(np.fft.rfft(v) / (1.0 + dt * self.k2), n=self.n)

    def mean_u(self, v):
        return self.dot(v * self.u, v)

    def potential(self, v, n_ph):
        return (self.v_ext + n_ph * self.u + self.g * v**2) * v

    def interaction_energy(self, v):
        return 0.5 * self.g * float(np.sum(v**4) * self.dx)

    def external_energy(self, v):
        return self.dot(v * self.v_ext, v)


class _FourierProblem:
    """Operators of the mean-field problem in the plane-wave basis."""

    def __init__(self, params: PhysicalParams, n_max: int):
        self.params = params
        self.n_max = n_max
        self.m = np.arange(-n_max, n_max + 1)
        self.k2 = 4.0 * self.m.astype(float) ** 2
        self.lmat = params.u0 * light_shift_matrix(n_max)
        self.g = params.g_coll

    @staticmethod
    def dot(a, b):
        return float(np.dot(a, b))

    def kinetic(self, v):
        return self.k2 * v

    def kinetic_energy(self, v):
        return float(np.dot(self.k2 * v, v))

    def precondition(self, v, dt):
        return v / (1.0 + dt * self.k2)

    def mean_u(self, v):
        return float(v @ self.lmat @ v)

    def _cubic(self, v):
        conv = np.convolve(np.convolve(v, v), v)
        return conv[2 * self.n_max:4 * self.n_max + 1]

    def potential(self, v, n_ph):
        out = n_ph * (self.lmat @ v)
        if self.g:
            out = out + self.g * self._cubic(v)
        return out

    def interaction_energy(self, v):
        if not self.g:
            return 0.0
        return 0.5 * self.g * float(np.dot(v, self._cubic(v)))

    @staticmethod
    def external_energy(v):
        return 0.0


def _energy(problem, v) -> float:
    p = problem.params
    s = p.n_atoms * problem.mean_u(v)
    return (problem.kinetic_energy(v) + problem.external_energy(v)
            + problem.interaction_energy(v) + _cavity_potential(p, s) / p.n_atoms)


def energy_functional(state: MeanFieldState, v_ext=None) -> float:
    """Energy functional whose constrained minima are the mean-field states.

    ``E = <T> + <V_ext> + (pi g / 2) int phi^4 + (eta^2/(N kappa)) arctan((N<U> - Delta_C)/kappa)``.
    Its gradient with respect to ``phi`` is twice the mean-field operator
    applied to ``phi``, so imaginary-time propagation decreases it.
    """
    p = state.params
    if state.representation is Representation.GRID:
        return _energy(_GridProblem(p, state.psi.size, v_ext), state.psi)
    if state.representation is Representation.FOURIER:
        return _energy(_FourierProblem(p, (state.psi.size - 1) // 2), state.psi)
    b0, b1 = state.psi
    s = p.n_atoms * light_shift_expectation(state, p.u0)
    return 4.0 * b1**2 + _cavity_potential(p, s) / p.n_atoms


def _imaginary_time(problem, v, representation, *, dt, tol, max_iter, record_energy):
    """Preconditioned imaginary-time relaxation with step backtracking.

    One step is ``v <- normalize((1 + dt T)^-1 [v - dt (V - mu) v])``.  Its
    fixed points satisfy ``(T + V) v = mu v`` exactly, independent of
    ``dt``.  A step that raises the energy is retried with half the step.
    """
    p = problem.params
    v = v / math.sqrt(problem.dot(v, v))
    energy = _energy(problem, v)
    history = [energy] if record_energy else None
    dt_min = dt * 2.0**-30
    change = math.inf
    for iteration in range(1, max_iter + 1):
        mean_u = problem.mean_u(v)
        n_ph = abs(cavity_steady_field(p, mean_u)) ** 2
        vv = problem.potential(v, n_ph)
        mu = problem.dot(v, problem.kinetic(v) + vv)
        e_tol = 1e-12 * max(abs(energy), 1e-8)
        while True:
            w = problem.precondition(v - dt * (vv - mu * v), dt)
            w /= math.sqrt(problem.dot(w, w))
            new_energy = _energy(problem, w)
            if not np.all(np.isfinite(w)) or not math.isfinite(new_energy):
                raise ConvergenceError("NaN encountered during imaginary-time propagation",
                                       residual=change, delta_c=p.delta_c)
            if new_energy <= energy + e_tol:
                break
            dt *= 0.5
            if dt < dt_min:
                raise ConvergenceError("imaginary-time step underflow", residual=change,
                                       delta_c=p.delta_c)
        change = float(np.max(np.abs(w - v))) / dt
        v, energy = w, new_energy
        if record_energy:
            history.append(energy)
        if change < tol:
            break
    else:
        raise ConvergenceError(f"imaginary-time propagation did not converge in "
                               f"{max_iter} steps", residual=change, delta_c=p.delta_c)

    mean_u = problem.mean_u(v)
    alpha = cavity_steady_field(p, mean_u)
    n_ph = abs(alpha) ** 2
    mu = problem.dot(v, problem.kinetic(v) + problem.potential(v, n_ph))
    return MeanFieldState(
        representation=representation, psi=v, alpha_ss=alpha, mu=mu, mean_u=mean_u,
        converged=True, residual=change, params=p, iterations=iteration,
        energy_history=None if history is None else np.array(history))


def solve_gpe_grid(params: PhysicalParams, grid: GridConfig | None = None, v_ext=None,
                   init: MeanFieldState | None = None, *, dt: float = 1e-3,
                   tol: float = 1e-10, max_iter: int = 200_000,
                   record_energy: bool = False) -> MeanFieldState:
    """Mean-field state on a uniform periodic grid by imaginary-time relaxation.

    Parameters
    ----------
    params : PhysicalParams
    grid : GridConfig, optional
        Number of grid points (default 200).
    v_ext : array_like, optional
        External potential sampled on the grid (default zero).
    init : MeanFieldState, optional
        Warm start in any representation; the homogeneous state otherwise.
    dt : float
        Imaginary-time step in units of ``1/omega_R``.
    tol : float
        Convergence threshold on ``max|phi_new - phi| / dt``.
    max_iter : int
    record_energy : bool
        Keep the energy functional after every step in
        ``state.energy_history``.

    Returns
    -------
    MeanFieldState

    Raises
    ------
    ConvergenceError
        If the iteration does not converge or produces NaNs.
    """
    grid = GridConfig() if grid is None else grid
    problem = _GridProblem(params, grid.n_points, v_ext)
    if init is None:
        v = np.ones(grid.n_points)
    else:
        v = _to_grid(init, grid.n_points)
    return _imaginary_time(problem, v, Representation.GRID, dt=dt, tol=tol,
                           max_iter=max_iter, record_energy=record_energy)


def solve_gpe_fourier(params: PhysicalParams, n_max: int = 8,
                      init: MeanFieldState | None = None, *, dt: float = 1e-3,
                      tol: float = 1e-10, max_iter: int = 200_000,
                      record_energy: bool = False) -> MeanFieldState:
    """Mean-field state in the plane-wave basis ``|n| <= n_max``.

    The light shift couples neighbouring plane waves through the tridiagonal
    matrix :func:`light_shift_matrix`; the contact term is a triple
    convolution of the amplitudes.  See :func:`solve_gpe_grid` for the other
    arguments.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    problem = _FourierProblem(params, n_max)
    if init is None:
        v = np.zeros(2 * n_max + 1)
        v[n_max] = 1.0
    else:
        v = _to_fourier(init, n_max)
    return _imaginary_time(problem, v, Representation.FOURIER, dt=dt, tol=tol,
                           max_iter=max_iter, record_energy=record_energy)


# ---------------------------------------------------------------------------
# Two-mode model
# ---------------------------------------------------------------------------

def _two_mode_ground(n_ph: float, u0: float) -> np.ndarray:
    """Lowest eigenvector of ``diag(0, 4) + n_ph U`` in the two-mode basis."""
    b = n_ph * u0 / (2.0 * SQRT2)
    theta = -0.5 * math.atan(b / 2.0)
    return np.array([math.cos(theta), math.sin(theta)])


def _two_mode_mean_u(n_ph, u0):
    """``<U>`` of the adiabatic ground state at photon number ``n_ph``."""
    b = n_ph * u0 / (2.0 * SQRT2)
    return 0.5 * u0 - n_ph * u0**2 / (8.0 * np.sqrt(4.0 + b * b))


def _response_delta_c(params: PhysicalParams, delta):
    """Detuning ``Delta_C`` at which the effective detuning equals ``delta``."""
    n_ph = params.eta**2 / (delta * delta + params.kappa**2)
    return delta + params.n_atoms * _two_mode_mean_u(n_ph, params.u0)


def _response_slope(params: PhysicalParams, delta):
    """``d Delta_C / d delta`` along the two-mode response curve."""
    k2 = params.kappa**2
    n_ph = params.eta**2 / (delta * delta + k2)
    b = n_ph * params.u0 / (2.0 * SQRT2)
    w3 = (4.0 + b * b) ** 1.5
    return 1.0 + params.n_atoms * params.u0**2 * params.eta**2 * delta / (w3 * (delta * delta + k2) ** 2)


def _fold_deltas(params: PhysicalParams) -> list[float]:
    """Effective detunings of the folds of the two-mode response curve.

    The slope can only vanish for ``delta < 0``; it is sampled on a
    sinh-stretched mesh and refined with Brent's method.
    """
    if params.u0 == 0 or params.eta == 0:
        return []
    kappa = params.kappa
    s = np.linspace(0.0, 12.0, 4001)
    deltas = -kappa * np.sinh(s)
    slope = _response_slope(params, deltas)

    def f(t):
        return _response_slope(params, -kappa * math.sinh(t))

    roots = []
    sign = np.sign(slope)
    for i in np.nonzero(sign[1:] * sign[:-1] < 0)[0]:
        roots.append(brentq(f, s[i], s[i + 1], xtol=1e-15))
    if not roots:
        i = int(np.argmin(slope))
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, s.size - 1)]
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        if res.fun < 0:
            roots = [brentq(f, lo, res.x, xtol=1e-15), brentq(f, res.x, hi, xtol=1e-15)]
    return sorted(-kappa * math.sinh(t) for t in roots)


def two_mode_folds(params: PhysicalParams) -> tuple[float, float] | None:
    """Detunings bounding the bistable window of the two-mode model.

    Returns
    -------
    (delta_low, delta_high) or None
        ``delta_low`` is where the high-photon branch ends on a downward
        sweep, ``delta_high`` where the low-photon branch ends on an upward
        sweep.  ``None`` if the response curve is single valued.
    """
    folds = _fold_deltas(params)
    if len(folds) != 2:
        return None
    d1, d2 = folds
    return float(_response_delta_c(params, d2)), float(_response_delta_c(params, d1))


def _two_mode_roots(params: PhysicalParams) -> list[float]:
    """All self-consistent effective detunings ``delta`` at ``params.delta_c``."""
    u_eig = 0.5 * params.u0 * np.array([1 - 1 / SQRT2, 1 + 1 / SQRT2])
    lo = params.delta_c - params.n_atoms * u_eig.max() - 1.0
    hi = params.delta_c - params.n_atoms * u_eig.min() + 1.0
    edges = [lo] + [d for d in _fold_deltas(params) if lo < d < hi] + [hi]

    def f(d):
        return _response_delta_c(params, d) - params.delta_c

    xtol = 1e-13 * max(1.0, abs(params.delta_c))
    roots = []
    for a, b in zip(edges[:-1], edges[1:]):
        fa, fb = f(a), f(b)
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
    if f(edges[-1]) == 0.0:
        roots.append(edges[-1])
    return sorted(set(roots))


def _two_mode_state(params: PhysicalParams, n_ph: float) -> MeanFieldState:
    u0 = params.u0
    beta = _two_mode_ground(n_ph, u0)
    state = MeanFieldState(Representation.TWO_MODE, beta, 0j, 0.0, 0.0, False, math.inf, params)
    mean_u = light_shift_expectation(state, u0)
    alpha = cavity_steady_field(params, mean_u)
    h = np.diag([0.0, 4.0]) + abs(alpha) ** 2 * two_mode_light_shift(u0)
    mu = float(beta @ h @ beta)
    residual = float(np.linalg.norm((h - mu * np.eye(2)) @ beta))
    state.alpha_ss, state.mu, state.mean_u, state.residual = alpha, mu, mean_u, residual
    state.converged = residual < 1e-10
    return state


def _equivalent_photon_number(beta: np.ndarray, u0: float) -> float:
    """Photon number for which ``beta`` would be the adiabatic ground state."""
    b0, b1 = beta
    if b0 < 0:
        b0, b1 = -b0, -b1
    theta = math.atan2(b1, b0)
    theta = min(max(theta, -math.pi / 4 + 1e-12), math.pi / 4 - 1e-12)
    return max(0.0, -4.0 * SQRT2 * math.tan(2.0 * theta) / u0)


def solve_two_mode(params: PhysicalParams, init: MeanFieldState | None = None,
                   **_ignored) -> MeanFieldState:
    """Stationary state of the two-mode (``cos 0``, ``cos 2x``) model.

    The self-consistency condition is written as an explicit response curve
    ``Delta_C(delta) = delta + N <U>(eta^2/(delta^2 + kappa^2))``; all its
    roots at the requested ``Delta_C`` are bracketed between the folds and
    found with Brent's method.  The returned root is the one imaginary-time
    relaxation would reach from ``init``: the flow moves the photon number
    up (down) wherever the self-consistent photon number exceeds (falls
    short of) the current one.  Without ``init`` the homogeneous state is
    used, which selects the lowest-photon-number solution.

    Raises
    ------
    ConvergenceError
        If no root is found or the stationarity residual exceeds ``1e-10``.
    """
    u0 = params.u0
    if u0 == 0.0 or params.eta == 0.0:
        return _finish(params, 0.0)

    roots = _two_mode_roots(params)
    if not roots:
        raise ConvergenceError("no self-consistent two-mode solution found",
                               delta_c=params.delta_c)
    kappa2 = params.kappa**2
    n_roots = sorted(params.eta**2 / (d * d + kappa2) for d in roots)

    if init is None:
        n0 = 0.0
    else:
        beta0 = _to_fourier(init, 1)
        n0 = _equivalent_photon_number(np.array([beta0[1], SQRT2 * beta0[2]]), u0)
    n_out = params.eta**2 / ((params.delta_c - params.n_atoms * _two_mode_mean_u(n0, u0)) ** 2 + kappa2)
    drift = n_out - n0
    above = [n for n in n_roots if n > n0]
    below = [n for n in n_roots if n < n0]
    nearest = min(n_roots, key=lambda n: abs(n - n0))
    if abs(nearest - n0) <= 1e-8 * max(nearest, 1e-300):
        # already stationary: the sign of the drift is round-off
        target = nearest
    elif drift > 0 and above:
        target = above[0]
    elif drift < 0 and below:
        target = below[-1]
    else:
        target = min(n_roots, key=lambda n: abs(n - n0))
        if len(n_roots) == 3 and target == n_roots[1]:
            target = n_roots[0]
    return _finish(params, target)


def _finish(params, n_ph):
    state = _two_mode_state(params, n_ph)
    if not state.converged:
        raise ConvergenceError("two-mode stationarity residual too large",
                               residual=state.residual, delta_c=params.delta_c)
    return state


_SOLVERS = {
    Representation.GRID: solve_gpe_grid,
    Representation.FOURIER: solve_gpe_fourier,
    Representation.TWO_MODE: solve_two_mode,
}


def solve(params: PhysicalParams, representation="two_mode", grid: GridConfig | None = None,
          init: MeanFieldState | None = None, **kwargs) -> MeanFieldState:
    """Dispatch to the solver of the requested representation."""
    rep = Representation(representation)
    grid = GridConfig() if grid is None else grid
    if rep is Representation.GRID:
        return solve_gpe_grid(params, grid, init=init, **kwargs)
    if rep is Representation.FOURIER:
        return solve_gpe_fourier(params, grid.n_fourier, init=init, **kwargs)
    return solve_two_mode(params, init=init)


# ---------------------------------------------------------------------------
# Continuation
# ---------------------------------------------------------------------------

def _relative_jump(a: MeanFieldState, b: MeanFieldState) -> float:
    na, nb = a.photon_number, b.photon_number
    low = min(na, nb)
    if low <= 0.0:
        return 0.0 if max(na, nb) == 0.0 else math.inf
    return abs(na - nb) / low


def _bisect_jump(solve_at, a, sa, b, tol, threshold):
    """Locate a photon-number discontinuity between detunings ``a`` and ``b``.

    Each trial solve is warm-started from the last state known to lie on
    the branch.  Returns ``(a, sa, b, sb, is_jump)``; when ``is_jump`` is
    false ``sb`` is the continuation of the branch to ``b``.
    """
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        sm = solve_at(m, sa)
        if _relative_jump(sm, sa) > threshold:
            b = m
        else:
            a, sa = m, sm
    sb = solve_at(b, sa)
    return a, sa, b, sb, _relative_jump(sb, sa) > threshold


def continue_branch(params: PhysicalParams, delta_range: Sequence[float], direction: str = "up",
                    representation="two_mode", n_steps: int = 400, *,
                    grid: GridConfig | None = None, init: MeanFieldState | None = None,
                    jump_threshold: float = 0.25, refine_tol: float = 1e-3,
                    max_halvings: int = 6, on_error: str = "raise",
                    **solver_kwargs) -> Branch:
    """Follow a mean-field branch through a detuning sweep.

    Every solve is warm-started from the previous converged state.  When
    the photon number changes by more than ``jump_threshold`` (relative)
    between neighbouring points the interval is bisected down to
    ``refine_tol``; a discontinuity that survives refinement terminates the
    branch, otherwise the sweep continues on the same branch.

    Parameters
    ----------
    params : PhysicalParams
        ``params.delta_c`` is ignored; the sweep sets it.
    delta_range : (float, float)
        Sweep interval.
    direction : {"up", "down"}
    representation : str or Representation
    n_steps : int
        Number of equally spaced detunings.
    grid : GridConfig, optional
    init : MeanFieldState, optional
        Warm start for the first point.
    jump_threshold : float
        Relative photon-number jump that signals a fold.
    refine_tol : float
        Width of the final bisection bracket around a fold.
    max_halvings : int
        A failing solve is retried by approaching it with up to this many
        halvings of the continuation step.
    on_error : {"raise", "skip"}
        Whether solver failures abort the sweep or are recorded in
        ``Branch.failures``.

    Returns
    -------
    Branch
    """
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip'")
    lo, hi = (float(v) for v in delta_range)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError("delta_range must be a finite interval with lo < hi")
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    rep = Representation(representation)
    grid = GridConfig() if grid is None else grid

    def solve_at(delta, warm):
        return solve(params.replace(delta_c=float(delta)), rep, grid, init=warm, **solver_kwargs)

    deltas = np.linspace(lo, hi, n_steps)
    if direction == "down":
        deltas = deltas[::-1]

    branch = Branch(direction=direction, representation=rep, delta_c=np.array([]), states=[],
                    _solve=solve_at, _jump_threshold=jump_threshold)
    kept_deltas = []
    prev_delta, prev = None, init

    for delta in deltas:
        try:
            state = _solve_with_retries(solve_at, prev_delta, prev, delta, max_halvings)
        except ConvergenceError as exc:
            if on_error == "raise":
                if exc.delta_c is None:
                    exc.delta_c = float(delta)
                raise
            branch.failures.append((float(delta), str(exc)))
            continue
        if prev_delta is not None:
            a, sa = prev_delta, prev
            while _relative_jump(state, sa) > jump_threshold:
                a, sa, b, sb, is_jump = _bisect_jump(solve_at, a, sa, delta, refine_tol,
                                                     jump_threshold)
                if is_jump:
                    branch.endpoint, branch.endpoint_state, branch.jump_delta = a, sa, b
                    break
                a, sa = b, sb
                state = solve_at(delta, sa)
            if branch.endpoint is not None:
                break
        kept_deltas.append(float(delta))
        branch.states.append(state)
        prev_delta, prev = float(delta), state

    branch.delta_c = np.array(kept_deltas)
    branch.labels = [None] * len(branch.states)
    return branch


def _solve_with_retries(solve_at, prev_delta, prev, delta, max_halvings):
    try:
        return solve_at(delta, prev)
    except ConvergenceError:
        if prev_delta is None or max_halvings <= 0:
            raise
    # approach the failing detuning in progressively smaller steps
    for level in range(1, max_halvings + 1):
        steps = 2**level
        warm = prev
        try:
            for t in np.linspace(prev_delta, delta, steps + 1)[1:]:
                warm = solve_at(t, warm)
            return warm
        except ConvergenceError:
            continue
    return solve_at(delta, prev)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

BRANCH_COLUMNS = ("delta_c", "photon_number", "beta1_sq", "mean_u", "mu", "converged")


def branch_rows(branch: Branch) -> list[tuple]:
    """Rows ``(delta_c, photon_number, beta1_sq, mean_u, mu, converged)``."""
    return [(float(d), s.photon_number, s.beta1_sq, s.mean_u, s.mu, s.converged)
            for d, s in zip(branch.delta_c, branch.states)]


def write_branch_csv(branch: Branch, target, params: PhysicalParams | None = None):
    """Write a branch as CSV with columns :data:`BRANCH_COLUMNS`."""
    comments = [f"direction: {branch.direction}", f"representation: {branch.representation.value}"]
    if branch.endpoint is not None:
        comments.append(f"endpoint: {branch.endpoint:.16e}")
    return write_csv(target, BRANCH_COLUMNS, branch_rows(branch),
                     params=None if params is None else params.as_dict(), comments=comments)
