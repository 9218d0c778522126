"""Steady-state second moments of the two-mode fluctuations.

Two independent routes give the steady covariance of the Gaussian
photon / atom fluctuation state:

* :func:`steady_correlations` -- the double sum over quasi-normal modes,
  driven by the vacuum cavity noise entering the two photon rows;
* :func:`lyapunov_covariance` -- the continuous Lyapunov equation
  ``A C + C A^T + D = 0`` for the real quadrature drift ``A``.

Both are evaluated in extended precision by default.  Far from resonance
the atom-like mode is damped at a rate ~1e-9 while its occupation is ~1e3,
so double precision loses about eight digits in either route.

Quadratures are ``dx = (da + da^+)/sqrt 2``, ``dy = -i (da - da^+)/sqrt 2``
and likewise ``(dX, dY)`` for the canonically normalised atomic mode
``dc``.  The cavity input is vacuum (zero temperature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .exceptions import InvalidCovarianceError, NoSteadyStateError
from .fluctuations import FluctuationMatrix, ModeSet, classify_modes
from .io import write_csv
from .meanfield import Representation

__all__ = [
    "OperatorCorrelations",
    "QuadCovariance",
    "QUADRATURE_TRANSFORM",
    "steady_correlations",
    "lyapunov_covariance",
    "quadrature_covariance",
    "nonclassical_photon_number",
    "depletion",
    "log_negativity",
    "smaller_pt_symplectic_eigenvalue",
    "symplectic_eigenvalues",
    "photon_axis_angle",
    "two_mode_squeezed_covariance",
    "CORRELATION_COLUMNS",
    "write_correlations_csv",
]

#: Maps ``(da, da^+, dc, dc^+)`` to ``(dx, dy, dX, dY)``.
QUADRATURE_TRANSFORM = np.array([[1, 1, 0, 0],
                                 [-1j, 1j, 0, 0],
                                 [0, 0, 1, 1],
                                 [0, 0, -1j, 1j]]) / math.sqrt(2.0)

#: Symplectic form for the ordering ``(x, y, X, Y)``.
OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))

DEFAULT_DPS = 50


@dataclass
class OperatorCorrelations:
    """Equal-time moments ``<R_k R_l>`` of ``R = (da, da^+, dc, dc^+)``.

    ``dc`` is the canonically normalised atomic fluctuation mode.
    """

    matrix: np.ndarray

    def commutator_residual(self) -> float:
        """Deviation of ``<[da, da^+]>`` and ``<[dc, dc^+]>`` from 1."""
        g = self.matrix
        return float(max(abs(g[0, 1] - g[1, 0] - 1.0), abs(g[2, 3] - g[3, 2] - 1.0)))


@dataclass
class QuadCovariance:
    """Symmetrised quadrature covariance ``C_kl = <u_k u_l + u_l u_k>/2``.

    Ordering ``(dx, dy, dX, dY)`` -- photon block ``P``, atom block ``A``
    and cross block ``X``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.matrix, dtype=float)
        if c.shape != (4, 4):
            raise InvalidCovarianceError("covariance must be 4x4")
        asym = np.max(np.abs(c - c.T))
        if asym > 1e-10 * max(1.0, np.max(np.abs(c))):
            raise InvalidCovarianceError(f"covariance not symmetric (residual {asym:.3g})")
        self.matrix = 0.5 * (c + c.T)

    @property
    def P(self) -> np.ndarray:
        return self.matrix[:2, :2]

    @property
    def A(self) -> np.ndarray:
        return self.matrix[2:, 2:]

    @property
    def X(self) -> np.ndarray:
        return self.matrix[:2, 2:]

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self)

    def is_physical(self, tol: float = 1e-8) -> bool:
        """Heisenberg bound ``C + i Omega / 2 >= 0`` via symplectic eigenvalues."""
        return bool(np.all(self.symplectic_eigenvalues() >= 0.5 - tol))


# ---------------------------------------------------------------------------
# Mode sum
# ---------------------------------------------------------------------------

def _check_two_mode(fm: FluctuationMatrix):
    if fm.representation is not Representation.TWO_MODE:
        raise ValueError("correlations are implemented for the two-mode model only")


def _physical_matrix(fm: FluctuationMatrix, dps):
    """Drift matrix for canonically normalised operators (as mpmath if dps)."""
    s = fm.atom_scale
    if dps is None:
        scale = np.array([1.0, 1.0, s, s])
        return fm.m * scale[:, None] / scale[None, :]
    sm = mpmath.sqrt(mpmath.mpf(fm.state.params.n_atoms)) if fm.state is not None else mpmath.mpf(s)
    scale = [1, 1, sm, sm]
    m = mpmath.matrix(4, 4)
    for i in range(4):
        for j in range(4):
            z = complex(fm.m[i, j])
            m[i, j] = mpmath.mpc(z.real, z.imag) * scale[i] / scale[j]
    return m


def _retained(ms: ModeSet) -> np.ndarray:
    return ms.photon_coupled & ~ms.zero_mode & ~ms.parity_decoupled


def steady_correlations(ms: ModeSet, kappa: float | None = None, *,
                        dps: int | None = DEFAULT_DPS) -> OperatorCorrelations:
    """Steady-state moments from the quasi-normal-mode double sum.

    ``<R_k R_l> = 2 kappa sum_{m,n} conj(l1_m) conj(l2_n) r_k^m r_l^n / (i (w_m + w_n))``

    over photon-coupled, non-zero modes, where ``l1, l2`` are the photon
    components of the left eigenvectors.

    Parameters
    ----------
    ms : ModeSet
        Classified two-mode eigensystem.
    kappa : float, optional
        Cavity decay rate (defaults to the state's parameters).
    dps : int or None
        Decimal digits for the extended-precision evaluation; ``None`` uses
        the double-precision eigenvectors in ``ms`` directly.

    Raises
    ------
    NoSteadyStateError
        If a photon-coupled mode is not damped (heating state).
    """
    fm = ms.matrix
    _check_two_mode(fm)
    if not ms.classified:
        ms = classify_modes(ms)
    kappa = fm.state.params.kappa if kappa is None else kappa
    keep = _retained(ms)
    if np.any(ms.eigenvalues[keep].imag > ms.tol_growth):
        raise NoSteadyStateError("no steady state exists: a photon-coupled mode is growing")
    if np.any(ms.eigenvalues[keep].imag >= 0):
        raise NoSteadyStateError("no steady state exists: a photon-coupled mode is undamped")

    if dps is None:
        s = np.array([1.0, 1.0, fm.atom_scale, fm.atom_scale])
        r = ms.right[:, keep] * s[:, None]
        lconj = ms.left[:, keep].conj()
        w = ms.eigenvalues[keep]
        c1, c2 = lconj[0], lconj[1]
        weights = 2 * kappa * np.outer(c1, c2) / (1j * (w[:, None] + w[None, :]))
        g = r @ weights @ r.T
        return OperatorCorrelations(g)

    with mpmath.workdps(dps):
        m = _physical_matrix(fm, dps)
        w, r = mpmath.eig(m)
        rinv = mpmath.inverse(r)
        # match the extended-precision modes to the classified double modes
        w_np = np.array([complex(z) for z in w])
        idx = [int(np.argmin(np.abs(ms.eigenvalues - z))) for z in w_np]
        if len(set(idx)) != len(idx):
            raise NoSteadyStateError("could not match extended-precision modes")
        keep_mp = [k for k, i in enumerate(idx) if keep[i]]
        kap = mpmath.mpf(kappa)
        g = mpmath.matrix(4, 4)
        for a in keep_mp:
            for b in keep_mp:
                coef = 2 * kap * rinv[a, 0] * rinv[b, 1] / (1j * (w[a] + w[b]))
                for k in range(4):
                    rk = coef * r[k, a]
                    for l in range(4):
                        g[k, l] += rk * r[l, b]
        out = np.array([[complex(g[k, l]) for l in range(4)] for k in range(4)])
    return OperatorCorrelations(out)


# ---------------------------------------------------------------------------
# Lyapunov oracle
# ---------------------------------------------------------------------------

def _quadrature_drift(fm: FluctuationMatrix):
    """Real drift ``A = -i T M_phys T^-1`` of the quadrature vector (double)."""
    t = QUADRATURE_TRANSFORM
    a = -1j * t @ _physical_matrix(fm, None) @ np.linalg.inv(t)
    if np.max(np.abs(a.imag)) > 1e-9 * max(1.0, np.max(np.abs(a))):
        raise ValueError("quadrature drift is not real; matrix lacks the C M C = -M* structure")
    return a.real


def lyapunov_covariance(fm: FluctuationMatrix, kappa: float | None = None, *,
                        dps: int | None = DEFAULT_DPS) -> QuadCovariance:
    """Steady covariance from ``A C + C A^T + kappa diag(1, 1, 0, 0) = 0``.

    The diffusion term is the vacuum cavity input: it makes the decoupled
    cavity relax to ``P = I/2``.

    Raises
    ------
    NoSteadyStateError
        If the drift has an eigenvalue with nonnegative real part.
    """
    _check_two_mode(fm)
    kappa = fm.state.params.kappa if kappa is None else kappa
    d = np.diag([kappa, kappa, 0.0, 0.0])
    a = _quadrature_drift(fm)
    if np.max(np.linalg.eigvals(a).real) >= 0:
        raise NoSteadyStateError("no steady state exists: the drift matrix is unstable")
    if dps is None:
        c = solve_continuous_lyapunov(a, -d)
        return QuadCovariance(0.5 * (c + c.T))

    with mpmath.workdps(dps):
        m = _physical_matrix(fm, dps)
        t = mpmath.matrix(QUADRATURE_TRANSFORM.tolist())
        tinv = mpmath.inverse(t)
        am = -1j * t * m * tinv
        am = mpmath.matrix([[mpmath.re(am[i, j]) for j in range(4)] for i in range(4)])
        eye = mpmath.eye(4)
        # column-major vec: vec(A C) = (I kron A) vec C, vec(C A^T) = (A kron I) vec C
        big = mpmath.matrix(16, 16)
        for i in range(4):
            for j in range(4):
                for k in range(4):
                    for l in range(4):
                        big[i + 4 * j, k + 4 * l] = eye[j, l] * am[i, k] + am[j, l] * eye[i, k]
        rhs = mpmath.matrix(16, 1)
        rhs[0] = -mpmath.mpf(kappa)
        rhs[5] = -mpmath.mpf(kappa)
        vec = mpmath.lu_solve(big, rhs)
        c = np.array([[float(vec[i + 4 * j]) for j in range(4)] for i in range(4)])
    return QuadCovariance(0.5 * (c + c.T))


# ---------------------------------------------------------------------------
# Quadratures and derived quantities
# ---------------------------------------------------------------------------

def quadrature_covariance(oc: OperatorCorrelations) -> QuadCovariance:
    """Symmetrised quadrature covariance of operator moments.

    Raises
    ------
    InvalidCovarianceError
        If the commutators are violated or the result has an imaginary part
        above ``1e-8`` (relative to the largest entry when that exceeds 1).
    """
    if oc.commutator_residual() > 1e-8:
        raise InvalidCovarianceError(
            f"operator moments violate the commutators (residual {oc.commutator_residual():.3g})")
    t = QUADRATURE_TRANSFORM
    c = t @ oc.matrix @ t.T
    c = 0.5 * (c + c.T)
    scale = max(1.0, float(np.max(np.abs(c))))
    if np.max(np.abs(c.imag)) > 1e-8 * scale:
        raise InvalidCovarianceError(
            f"covariance has an imaginary part of {np.max(np.abs(c.imag)):.3g}")
    return QuadCovariance(c.real)


def nonclassical_photon_number(c: QuadCovariance) -> float:
    """``<da^+ da> = (C_11 + C_22 - 1) / 2``."""
    return 0.5 * (c.matrix[0, 0] + c.matrix[1, 1] - 1.0)


def depletion(c: QuadCovariance) -> float:
    """Number of atoms outside the condensate, ``(C_33 + C_44 - 1) / 2``."""
    return 0.5 * (c.matrix[2, 2] + c.matrix[3, 3] - 1.0)


def symplectic_eigenvalues(c: QuadCovariance) -> np.ndarray:
    """Both symplectic eigenvalues (ascending) from the spectrum of ``i Omega C``."""
    ev = np.linalg.eigvals(1j * OMEGA @ c.matrix)
    return np.sort(np.abs(ev.real))[::2]


def smaller_pt_symplectic_eigenvalue(c: QuadCovariance) -> float:
    """Smaller symplectic eigenvalue ``eta^-`` of the partially transposed state.

    ``eta^- = sqrt((S - sqrt(S^2 - 4 det C)) / 2)`` with
    ``S = det P + det A - 2 det X``.  A discriminant that is negative by
    less than ``1e-10`` (relative to ``S^2`` when that exceeds 1) is treated
    as zero.

    Raises
    ------
    InvalidCovarianceError
        For a more negative discriminant.
    """
    m = c.matrix
    s = np.linalg.det(c.P) + np.linalg.det(c.A) - 2.0 * np.linalg.det(c.X)
    det_c = np.linalg.det(m)
    disc = s * s - 4.0 * det_c
    if disc < 0:
        if disc < -1e-10 * max(1.0, s * s):
            raise InvalidCovarianceError(f"invalid covariance: discriminant {disc:.3g} < 0")
        disc = 0.0
    root = math.sqrt(disc)
    # (s - root)/2 written without cancellation: (s - root)(s + root) = 4 det C
    eta2 = 2.0 * det_c / (s + root) if s + root > 0 else 0.5 * (s - root)
    if eta2 < 0:
        raise InvalidCovarianceError("invalid covariance: negative symplectic eigenvalue")
    return math.sqrt(eta2)


def log_negativity(c: QuadCovariance) -> float:
    """Logarithmic negativity ``E_N = max(0, -ln(2 eta^-))``."""
    eta = smaller_pt_symplectic_eigenvalue(c)
    if eta == 0.0:
        return math.inf
    return max(0.0, -math.log(2.0 * eta))


def photon_axis_angle(c: QuadCovariance) -> float:
    """Angle in ``(-pi/2, pi/2]`` of the major axis of ``P`` from the ``dx`` axis."""
    p = c.P
    return 0.5 * math.atan2(2.0 * p[0, 1], p[0, 0] - p[1, 1])


def two_mode_squeezed_covariance(r: float) -> QuadCovariance:
    """Covariance of the two-mode squeezed vacuum with squeezing ``r``."""
    ch, sh = 0.5 * math.cosh(2 * r), 0.5 * math.sinh(2 * r)
    c = np.zeros((4, 4))
    c[:2, :2] = c[2:, 2:] = ch * np.eye(2)
    c[:2, 2:] = c[2:, :2] = sh * np.diag([1.0, -1.0])
    return QuadCovariance(c)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

CORRELATION_COLUMNS = ("delta_c", "n_ph_classical", "n_ph_nonclassical", "depletion",
                       "log_negativity", "branch")


def write_correlations_csv(rows, target, params=None, comments=()):
    """Write rows with columns :data:`CORRELATION_COLUMNS`."""
    return write_csv(target, CORRELATION_COLUMNS, rows,
                     params=None if params is None else params.as_dict(), comments=comments)
