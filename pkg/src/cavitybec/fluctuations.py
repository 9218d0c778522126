"""Linearised quantum fluctuations around a mean-field state.

The fluctuation vector is ``R = (da, da^+, dpsi, dpsi^+)`` where ``dpsi``
is either sampled on the grid or reduced to the single mode ``dc``
orthogonal to the condensate in the two-mode model.  Its drift matrix ``M``
obeys ``i dR/dt = M R + noise`` with the cavity noise entering the first two
rows only.  ``M`` has the structure ``C M C = -M*`` where ``C`` swaps each
operator with its adjoint, so eigenvalues come in pairs
``(eps - i gamma, -eps - i gamma)``.

Conventions
-----------
* The condensate phase direction is a neutral zero mode of the raw matrix
  and is not diagonalisable there (a Jordan block).  The grid builder
  therefore projects the atomic components onto the complement of the
  condensate (``Q = 1 - |phi><phi|``), which leaves every nonzero
  eigenvalue untouched and turns the zero mode into two exact, decoupled
  null vectors.  The two-mode matrix has the zero mode removed by
  construction.
* Two-mode atomic components are the rescaled operators
  ``dc~ = dc / sqrt(N)``; :attr:`FluctuationMatrix.atom_scale` records the
  factor needed to return to canonically normalised operators.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .exceptions import DefectiveSpectrumError
from .io import write_csv
from .meanfield import (MeanFieldState, Representation, _potential_profile,
                        two_mode_light_shift)
from .params import PERIOD, PhysicalParams

__all__ = [
    "Stability",
    "FluctuationMatrix",
    "ModeSet",
    "build_matrix_grid",
    "build_matrix_two_mode",
    "build_matrix",
    "symmetry_residual",
    "eigendecompose",
    "classify_modes",
    "stability",
    "optomechanical_modes",
    "spectrum_rows",
    "write_spectrum_csv",
    "SPECTRUM_COLUMNS",
]


class Stability(str, Enum):
    """Dynamical character of a mean-field state."""

    COOLING = "cooling"
    HEATING = "heating"


@dataclass
class FluctuationMatrix:
    """Drift matrix of the linearised fluctuations.

    Attributes
    ----------
    m : ndarray, complex, shape (2 n + 2, 2 n + 2)
        Components ordered ``(da, da^+, dpsi_1..dpsi_n, dpsi_1^+..dpsi_n^+)``.
    representation : Representation
        ``GRID`` or ``TWO_MODE``.
    n_atomic : int
        Number of atomic components ``n`` (grid points, or 1).
    noise_rows : tuple of int
        Rows driven by the cavity input noise.
    atom_scale : float
        Factor ``s`` such that canonically normalised atomic operators are
        ``s`` times the components used in ``m``.
    projected : bool
        Whether the condensate direction has been projected out.
    state : MeanFieldState
        State the matrix was linearised around.
    """

    m: np.ndarray
    representation: Representation
    n_atomic: int
    noise_rows: tuple = (0, 1)
    atom_scale: float = 1.0
    projected: bool = True
    state: Optional[MeanFieldState] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.m.shape[0]

    @property
    def basis(self) -> tuple:
        """Component labels in matrix order."""
        n = self.n_atomic
        if self.representation is Representation.TWO_MODE:
            return ("da", "da_dag", "dc", "dc_dag")
        return (("da", "da_dag") + tuple(f"dpsi[{j}]" for j in range(n))
                + tuple(f"dpsi_dag[{j}]" for j in range(n)))

    def swap_permutation(self) -> np.ndarray:
        """Index permutation implementing ``C`` (operator <-> adjoint)."""
        n = self.n_atomic
        return np.concatenate(([1, 0], np.arange(n) + 2 + n, np.arange(n) + 2))


@dataclass
class ModeSet:
    """Biorthogonal eigensystem of a fluctuation matrix.

    Eigenvectors are stored as columns in the full component basis of the
    matrix, normalised so that ``left[:, k].conj() @ right[:, l] = delta_kl``
    with unit-norm right eigenvectors.

    Attributes
    ----------
    eigenvalues : ndarray, complex
        ``omega_k = eps_k - i gamma_k``.
    right, left : ndarray, complex
    partner : ndarray of int
        Index of the mode with eigenvalue closest to ``-conj(omega_k)``.
    pairing_residual : ndarray
        ``|omega_partner + conj(omega_k)| / max(|omega_k|, 1)``.
    biorthogonality_residual : float
        ``max |L^H R - I|``.
    parity : ndarray of int
        ``+1`` / ``-1`` for even / odd atomic parity, ``0`` if not resolved.
    zero_mode, photon_coupled, parity_decoupled, unstable : ndarray of bool
        Classification flags (set by :func:`classify_modes`).
    matrix : FluctuationMatrix
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    partner: np.ndarray
    pairing_residual: np.ndarray
    biorthogonality_residual: float
    parity: np.ndarray
    matrix: FluctuationMatrix = field(repr=False)
    zero_mode: Optional[np.ndarray] = None
    photon_coupled: Optional[np.ndarray] = None
    parity_decoupled: Optional[np.ndarray] = None
    unstable: Optional[np.ndarray] = None

    def __len__(self):
        return self.eigenvalues.size

    @property
    def classified(self) -> bool:
        return self.photon_coupled is not None

    @property
    def photon_weight(self) -> np.ndarray:
        """Relative photon component ``sqrt(|l_1|^2 + |l_2|^2) / ||l||`` per mode."""
        rows = list(self.matrix.noise_rows)
        num = np.linalg.norm(self.left[rows, :], axis=0)
        return num / np.linalg.norm(self.left, axis=0)

    def reconstruct(self) -> np.ndarray:
        """``sum_k r_k omega_k l_k^H`` (equals ``M`` for a complete set)."""
        return (self.right * self.eigenvalues) @ self.left.conj().T

    @property
    def tol_zero(self) -> float:
        """Threshold below which ``|omega|`` counts as a zero mode."""
        return 1e-8 * float(np.max(np.abs(self.eigenvalues)))

    @property
    def tol_growth(self) -> float:
        """Threshold above which ``Im omega`` counts as growth.

        Set at the round-off level of the eigensolver (``1e3 eps max|omega|``):
        growth rates of the atomic mode away from resonance are many orders
        of magnitude below ``tol_zero`` yet perfectly resolved.
        """
        return 1e3 * np.finfo(float).eps * float(np.max(np.abs(self.eigenvalues)))


# ---------------------------------------------------------------------------
# Matrix construction
# ---------------------------------------------------------------------------

def _spectral_laplacian(n: int) -> np.ndarray:
    """Dense matrix of ``-d^2/dx^2`` on ``n`` periodic samples of ``[0, pi)``."""
    k2 = (2.0 * np.fft.fftfreq(n, d=1.0 / n)) ** 2
    col = np.fft.ifft(k2).real          # first column of the circulant
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    t = col[idx]
    return 0.5 * (t + t.T)


def _assemble(photon_a, row, col, h_diag, h_off, n):
    """Assemble ``M`` from its blocks so that ``C M C = -M*`` holds exactly."""
    m = np.zeros((2 * n + 2, 2 * n + 2), dtype=complex)
    a_, b_ = slice(2, n + 2), slice(n + 2, 2 * n + 2)
    m[0, 0] = photon_a
    m[1, 1] = -np.conj(photon_a)
    m[0, a_] = row
    m[0, b_] = row
    m[1, a_] = -np.conj(row)
    m[1, b_] = -np.conj(row)
    m[a_, 0] = np.conj(col[1])
    m[a_, 1] = col[0]
    m[b_, 0] = -np.conj(col[1])
    m[b_, 1] = -col[0]
    m[a_, a_] = h_diag
    m[a_, b_] = h_off
    m[b_, a_] = -h_off
    m[b_, b_] = -h_diag
    return m


def build_matrix_grid(state: MeanFieldState, params: PhysicalParams | None = None,
                      grid=None, *, v_ext=None, project_zero_mode: bool = True) -> FluctuationMatrix:
    """Drift matrix of the fluctuations around a grid state.

    Blocks (with ``Q = 1 - |phi><phi|`` applied to all atomic indices when
    ``project_zero_mode`` is true)::

        [ A            0            N a X        N a X       ]
        [ 0           -A*          -N a* X      -N a* X      ]
        [ a* Y         a Y          H0 + g'phi^2  g'phi^2     ]
        [-a* Y        -a Y         -g'phi^2     -H0 - g'phi^2]

    with ``A = -Delta_C + N<U> - i kappa``, ``X_j = phi_j U_j dx``,
    ``Y = U phi``, ``g' = pi g`` and
    ``H0 = T + V_ext + |a|^2 U - mu + g' phi^2``.

    Parameters
    ----------
    state : MeanFieldState
        Converged grid state.
    params : PhysicalParams, optional
        Defaults to ``state.params``.
    grid : GridConfig, optional
        If given, its ``n_points`` must match the state.
    v_ext : array_like, optional
        External potential the state was computed with.
    project_zero_mode : bool
        Project out the condensate direction (default).  With ``False`` the
        raw matrix is returned, whose zero eigenvalue is defective.
    """
    if state.representation is not Representation.GRID:
        raise ValueError("build_matrix_grid needs a grid state")
    if not state.converged:
        raise ValueError("state is not converged")
    params = state.params if params is None else params
    phi = np.asarray(state.psi, dtype=float)
    n = phi.size
    if grid is not None and grid.n_points != n:
        raise ValueError(f"dimension mismatch: grid has {grid.n_points} points, state {n}")
    dx = PERIOD / n
    x = np.arange(n) * dx
    u = _potential_profile(params.u0, x)
    v = np.zeros(n) if v_ext is None else np.asarray(v_ext, dtype=float)
    if v.shape != (n,):
        raise ValueError("dimension mismatch: v_ext")
    alpha = state.alpha_ss
    g = math.pi * params.g_coll
    photon_a = -params.delta_c + params.n_atoms * state.mean_u - 1j * params.kappa

    h0 = _spectral_laplacian(n) + np.diag(v + abs(alpha) ** 2 * u - state.mu + g * phi**2)
    h_diag = h0 + np.diag(g * phi**2)
    h_off = np.diag(g * phi**2)
    x_row = phi * u * dx
    y_col = u * phi
    if project_zero_mode:
        q = np.eye(n) - dx * np.outer(phi, phi)
        h_diag = q @ h_diag @ q
        h_off = q @ h_off @ q
        x_row = x_row @ q
        y_col = q @ y_col
    row = params.n_atoms * alpha * x_row
    m = _assemble(photon_a, row, (alpha * y_col, alpha * y_col), h_diag, h_off, n)
    return FluctuationMatrix(m=m, representation=Representation.GRID, n_atomic=n,
                             atom_scale=math.sqrt(params.n_atoms * dx),
                             projected=project_zero_mode, state=state)


def build_matrix_two_mode(state: MeanFieldState,
                          params: PhysicalParams | None = None) -> FluctuationMatrix:
    """4x4 drift matrix of the two-mode (optomechanical) model.

    With ``gamma = (-beta_1, beta_0)`` orthogonal to the condensate,
    ``G = beta U gamma`` and ``E = gamma K gamma`` (``K`` the mean-field
    operator minus ``mu``)::

        [ A      0      N a G   N a G ]
        [ 0     -A*    -N a* G -N a* G]
        [ a* G   a G    E       0     ]
        [-a* G  -a G    0      -E     ]
    """
    if state.representation is not Representation.TWO_MODE:
        raise ValueError("build_matrix_two_mode needs a two-mode state")
    if not state.converged:
        raise ValueError("state is not converged")
    params = state.params if params is None else params
    beta = np.asarray(state.psi, dtype=float)
    gamma = np.array([-beta[1], beta[0]])
    umat = two_mode_light_shift(params.u0)
    alpha = state.alpha_ss
    k = np.diag([0.0, 4.0]) + abs(alpha) ** 2 * umat - state.mu * np.eye(2)
    coupling = float(beta @ umat @ gamma)
    energy = float(gamma @ k @ gamma)
    photon_a = -params.delta_c + params.n_atoms * state.mean_u - 1j * params.kappa
    row = np.array([params.n_atoms * alpha * coupling])
    col = np.array([alpha * coupling])
    m = _assemble(photon_a, row, (col, col), np.array([[energy]]), np.array([[0.0]]), 1)
    return FluctuationMatrix(m=m, representation=Representation.TWO_MODE, n_atomic=1,
                             atom_scale=math.sqrt(params.n_atoms), projected=True,
                             state=state)


def build_matrix(state: MeanFieldState, params: PhysicalParams | None = None,
                 **kwargs) -> FluctuationMatrix:
    """Dispatch on the state's representation."""
    if state.representation is Representation.TWO_MODE:
        return build_matrix_two_mode(state, params)
    if state.representation is Representation.GRID:
        return build_matrix_grid(state, params, **kwargs)
    raise ValueError("fluctuation matrices are available for grid and two-mode states")


def symmetry_residual(fm: FluctuationMatrix) -> float:
    """``max |C M C + M*|`` (zero for a correctly structured matrix)."""
    p = fm.swap_permutation()
    return float(np.max(np.abs(fm.m[np.ix_(p, p)] + fm.m.conj())))


# ---------------------------------------------------------------------------
# Eigendecomposition
# ---------------------------------------------------------------------------

def _parity_bases(n: int):
    """Orthonormal even / odd bases for the reflection ``j -> -j mod n``."""
    half = n // 2
    even = np.zeros((n, half + 1))
    odd = np.zeros((n, half - 1))
    even[0, 0] = 1.0
    even[half, half] = 1.0
    s = 1.0 / math.sqrt(2.0)
    for j in range(1, half):
        even[j, j] = even[n - j, j] = s
        odd[j, j - 1] = s
        odd[n - j, j - 1] = -s
    return even, odd


def _lift(basis_a, n_photon):
    """Block-diagonal embedding ``diag(I_photon, B, B)``."""
    n, k = basis_a.shape
    out = np.zeros((n_photon + 2 * n, n_photon + 2 * k))
    out[:n_photon, :n_photon] = np.eye(n_photon)
    out[n_photon:n_photon + n, n_photon:n_photon + k] = basis_a
    out[n_photon + n:, n_photon + k:] = basis_a
    return out


def _eig_biorthogonal(m: np.ndarray):
    """Right/left eigenvectors with ``L^H R = I`` and unit-norm ``R`` columns."""
    try:
        w, r = sla.eig(m)
    except (sla.LinAlgError, ValueError) as exc:
        raise DefectiveSpectrumError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise DefectiveSpectrumError("eigensolver returned non-finite eigenvalues")
    r = r / np.linalg.norm(r, axis=0)
    _check_defective(w, r, m)
    try:
        left = np.linalg.solve(r.conj().T, np.eye(r.shape[0], dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise DefectiveSpectrumError("right eigenvectors are linearly dependent") from exc
    return w, r, left


def _check_defective(w, r, m):
    """Raise if nearly equal eigenvalues share (nearly) parallel eigenvectors."""
    scale = max(float(np.max(np.abs(w))), 1.0)
    close_tol = 1e-6 * scale
    order = np.argsort(w.real)
    ws = w[order]
    for a in range(ws.size):
        for b in range(a + 1, ws.size):
            if ws[b].real - ws[a].real > close_tol:
                break
            if abs(ws[b] - ws[a]) > close_tol:
                continue
            i, j = order[a], order[b]
            overlap = abs(np.vdot(r[:, i], r[:, j]))
            if overlap > 1.0 - 1e-6:
                cluster = sorted(int(k) for k in np.nonzero(np.abs(w - w[i]) <= close_tol)[0])
                raise DefectiveSpectrumError(
                    f"defective eigenvalue cluster near {w[i]:.6g}: modes {cluster} "
                    f"have parallel eigenvectors", cluster=cluster)


def _pairing(w):
    target = -w.conj()
    dist = np.abs(w[None, :] - target[:, None])
    partner = np.argmin(dist, axis=1)
    residual = dist[np.arange(w.size), partner] / np.maximum(np.abs(w), 1.0)
    return partner, residual


def eigendecompose(fm: FluctuationMatrix, *, parity_reduce: bool | None = None,
                   include_odd: bool = False, classify: bool = True) -> ModeSet:
    """Full biorthogonal eigensystem of ``fm``.

    Parameters
    ----------
    fm : FluctuationMatrix
    parity_reduce : bool, optional
        For grid matrices, diagonalise the even- and odd-parity blocks
        separately (default when the matrix is reflection symmetric).
    include_odd : bool
        With ``parity_reduce``, also return the odd-parity modes (which
        never couple to the cavity).  By default only the even block is
        returned.
    classify : bool
        Run :func:`classify_modes` on the result.

    Raises
    ------
    DefectiveSpectrumError
        If the eigenbasis is incomplete (e.g. an unprojected zero mode, or
        exactly at a fold) or biorthonormalisation fails.
    """
    m = fm.m
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    n = fm.n_atomic
    symmetric = False
    if fm.representation is Representation.GRID:
        refl = np.concatenate(([0, 1], 2 + (-np.arange(n)) % n, 2 + n + (-np.arange(n)) % n))
        symmetric = np.allclose(m[np.ix_(refl, refl)], m, rtol=0, atol=1e-12 * np.max(np.abs(m)))
        if parity_reduce is None:
            parity_reduce = symmetric
        elif parity_reduce and not symmetric:
            raise ValueError("matrix is not reflection symmetric; cannot reduce parity")
    else:
        parity_reduce = False

    if parity_reduce:
        even, odd = _parity_bases(n)
        b_even = _lift(even, 2)
        w, r_red, l_red = _eig_biorthogonal(b_even.T @ m @ b_even)
        right, left = b_even @ r_red, b_even @ l_red
        parity = np.ones(w.size, dtype=int)
        if include_odd:
            b_odd = _lift(odd, 0)
            atomic = m[2:, 2:]
            wo, ro, lo = _eig_biorthogonal(b_odd.T @ atomic @ b_odd)
            zeros = np.zeros((2, wo.size), dtype=complex)
            right = np.hstack([right, np.vstack([zeros, b_odd @ ro])])
            left = np.hstack([left, np.vstack([zeros, b_odd @ lo])])
            w = np.concatenate([w, wo])
            parity = np.concatenate([parity, -np.ones(wo.size, dtype=int)])
    else:
        w, right, left = _eig_biorthogonal(m)
        parity = np.zeros(w.size, dtype=int)
        if symmetric:
            refl_r = right[refl, :]
            parity[np.linalg.norm(refl_r - right, axis=0) < 1e-8] = 1
            parity[np.linalg.norm(refl_r + right, axis=0) < 1e-8] = -1

    biorth = float(np.max(np.abs(left.conj().T @ right - np.eye(w.size))))
    if biorth > 1e-8:
        worst = int(np.argmax(np.max(np.abs(left.conj().T @ right - np.eye(w.size)), axis=0)))
        cluster = sorted(int(k) for k in np.nonzero(np.abs(w - w[worst]) <= 1e-6 * max(1, abs(w[worst])))[0])
        raise DefectiveSpectrumError(
            f"biorthonormalisation failed (residual {biorth:.3g}) near eigenvalue "
            f"{w[worst]:.6g}, cluster {cluster}", cluster=cluster)
    partner, pair_res = _pairing(w)
    ms = ModeSet(eigenvalues=w, right=right, left=left, partner=partner,
                 pairing_residual=pair_res, biorthogonality_residual=biorth,
                 parity=parity, matrix=fm)
    return classify_modes(ms, fm) if classify else ms


def classify_modes(ms: ModeSet, fm: FluctuationMatrix | None = None) -> ModeSet:
    """Set the per-mode flags.

    * ``photon_coupled``: ``sqrt(|l_1|^2 + |l_2|^2) > 1e-8 ||l||``;
    * ``zero_mode``: ``|omega| < tol_zero`` and not photon coupled;
    * ``parity_decoupled``: odd atomic parity (grid model);
    * ``unstable``: ``Im omega > tol_growth``;

    with ``tol_zero = 1e-8 max|omega|`` and ``tol_growth = 1e3 eps max|omega|``.
    """
    w = ms.eigenvalues
    tol_zero = ms.tol_zero
    coupled = ms.photon_weight > 1e-8
    return dataclasses.replace(
        ms,
        photon_coupled=coupled,
        zero_mode=(np.abs(w) < tol_zero) & ~coupled,
        parity_decoupled=ms.parity < 0,
        unstable=w.imag > ms.tol_growth,
    )


def stability(ms: ModeSet) -> Stability:
    """``HEATING`` iff a photon-coupled, non-zero mode grows in time."""
    if not ms.classified:
        ms = classify_modes(ms)
    growing = ms.photon_coupled & ~ms.zero_mode & (ms.eigenvalues.imag > ms.tol_growth)
    return Stability.HEATING if np.any(growing) else Stability.COOLING


def optomechanical_modes(ms: ModeSet) -> tuple[int, int]:
    """Indices ``(photon_like, atom_like)`` of the two optomechanical modes.

    From every ``(omega, -omega*)`` pair of photon-coupled, non-zero modes
    the member with the larger real part is kept; the two with the largest
    photon coupling are returned, the more strongly coupled one being the
    photon-like mode.
    """
    if not ms.classified:
        ms = classify_modes(ms)
    weight = ms.photon_weight
    candidates = np.nonzero(ms.photon_coupled & ~ms.zero_mode)[0]
    chosen = []
    seen = set()
    for k in candidates:
        if k in seen:
            continue
        p = int(ms.partner[k])
        seen.update((k, p))
        pick = k
        if p != k and p in candidates and ms.eigenvalues[p].real > ms.eigenvalues[k].real:
            pick = p
        chosen.append(int(pick))
    if len(chosen) < 2:
        raise ValueError("fewer than two photon-coupled mode pairs")
    chosen.sort(key=lambda k: -weight[k])
    return chosen[0], chosen[1]


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

SPECTRUM_COLUMNS = ("delta_c", "re_omega", "im_omega", "flags")


def _mode_flags(ms: ModeSet, k: int, extra=()) -> str:
    names = list(extra)
    for name in ("zero_mode", "photon_coupled", "parity_decoupled", "unstable"):
        if getattr(ms, name)[k]:
            names.append(name)
    return "|".join(names)


def spectrum_rows(delta_c: float, ms: ModeSet, modes: str = "optomechanical") -> list[tuple]:
    """Spectrum rows ``(delta_c, re_omega, im_omega, flags)``.

    ``modes="optomechanical"`` keeps the photon-like and atom-like modes,
    ``"coupled"`` every photon-coupled mode, ``"all"`` every mode.
    """
    if not ms.classified:
        ms = classify_modes(ms)
    if modes == "optomechanical":
        ph, at = optomechanical_modes(ms)
        picks = [(ph, ("photon_like",)), (at, ("atom_like",))]
    elif modes == "coupled":
        picks = [(int(k), ()) for k in np.nonzero(ms.photon_coupled)[0]]
    elif modes == "all":
        picks = [(k, ()) for k in range(len(ms))]
    else:
        raise ValueError(f"unknown mode selection {modes!r}")
    return [(float(delta_c), float(ms.eigenvalues[k].real), float(ms.eigenvalues[k].imag),
             _mode_flags(ms, k, extra)) for k, extra in picks]


def write_spectrum_csv(rows, target, params: PhysicalParams | None = None, comments=()):
    """Write spectrum rows with columns :data:`SPECTRUM_COLUMNS`."""
    return write_csv(target, SPECTRUM_COLUMNS, rows,
                     params=None if params is None else params.as_dict(), comments=comments)
