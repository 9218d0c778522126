"""Detuning sweeps, turning points and the (Delta_C, eta) phase diagram.

A sweep runs two continuations over the same detuning mesh, one upward and
one downward.  Inside a bistable window they end on different branches:
the upward sweep follows the low-photon branch, the downward sweep the
high-photon branch.  Each converged state is then classified by its
fluctuation spectrum (cooling / heating), and cooling states additionally
get their steady-state correlations.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import correlations as corr
from .exceptions import CavityBECError
from .fluctuations import (Stability, build_matrix, eigendecompose, optomechanical_modes,
                           stability)
from .io import write_csv, write_json
from .meanfield import (Branch, MeanFieldState, Representation, _bisect_jump,
                        _relative_jump, continue_branch)
from .params import GridConfig, PhysicalParams

__all__ = [
    "SweepRow",
    "PhaseClass",
    "PhasePoint",
    "sweep_branches",
    "detuning_sweep",
    "find_turning_points",
    "bistable_width",
    "phase_diagram",
    "find_critical_point",
    "write_fig2",
    "write_fig4",
    "write_fig5",
    "write_fig6_8",
    "DEDUP_TOL",
]

#: Relative photon-number difference below which the up- and down-sweep
#: states at one detuning are considered the same solution.
DEDUP_TOL = 1e-4


@dataclass
class SweepRow:
    """One mean-field state of a detuning sweep with its analysis.

    Attributes
    ----------
    delta_c, eta : float
    branch : {"unique", "low", "high"}
        ``low`` / ``high`` inside a bistable window (upward / downward
        continuation), ``unique`` elsewhere.
    label : {"cooling", "heating", "failed"}
    photon_number, beta1_sq, mean_u, mu : float
    photon_mode, atom_mode : complex or None
        Eigenvalues ``eps - i gamma`` of the two optomechanical modes.
    n_ph_nonclassical, depletion, log_negativity : float or None
        Only on cooling rows when correlations were requested.
    error : str or None
        Failure message (solver, spectrum or correlation stage).
    """

    delta_c: float
    eta: float
    branch: str
    label: str
    photon_number: float = math.nan
    beta1_sq: float = math.nan
    mean_u: float = math.nan
    mu: float = math.nan
    photon_mode: Optional[complex] = None
    atom_mode: Optional[complex] = None
    n_ph_nonclassical: Optional[float] = None
    depletion: Optional[float] = None
    log_negativity: Optional[float] = None
    error: Optional[str] = None


class PhaseClass(str, Enum):
    COOLING = "cooling"
    HEATING = "heating"
    BISTABLE = "bistable"
    FAILED = "failed"


@dataclass(frozen=True)
class PhasePoint:
    delta_c: float
    eta: float
    phase: PhaseClass


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def sweep_branches(params: PhysicalParams, delta_range, n_steps: int = 400,
                   representation="two_mode", *, grid: GridConfig | None = None,
                   jump_threshold: float = 0.25, refine_tol: float = 1e-3,
                   on_error: str = "skip", **solver_kwargs) -> tuple[Branch, Branch]:
    """Upward and downward continuations over the same detuning mesh."""
    kwargs = dict(grid=grid, jump_threshold=jump_threshold, refine_tol=refine_tol,
                  on_error=on_error, **solver_kwargs)
    up = continue_branch(params, delta_range, "up", representation, n_steps, **kwargs)
    down = continue_branch(params, delta_range, "down", representation, n_steps, **kwargs)
    return up, down


def _paired_states(up: Branch, down: Branch):
    """Yield ``(delta, [(branch_name, state), ...])`` in ascending detuning."""
    by_delta: dict[float, dict] = {}
    for d, s in zip(up.delta_c, up.states):
        by_delta.setdefault(float(d), {})["up"] = s
    for d, s in zip(down.delta_c, down.states):
        by_delta.setdefault(float(d), {})["down"] = s
    for d in sorted(by_delta):
        entry = by_delta[d]
        su, sd = entry.get("up"), entry.get("down")
        if su is not None and sd is not None:
            if _relative_jump(su, sd) <= DEDUP_TOL:
                yield d, [("unique", su)]
            else:
                low, high = sorted((su, sd), key=lambda s: s.photon_number)
                yield d, [("low", low), ("high", high)]
        else:
            yield d, [("unique", su if su is not None else sd)]


def analyse_state(state: MeanFieldState, branch: str = "unique", *,
                  correlations: bool = True, dps: int | None = corr.DEFAULT_DPS) -> SweepRow:
    """Spectrum (and, for cooling two-mode states, correlations) of a state."""
    p = state.params
    row = SweepRow(delta_c=p.delta_c, eta=p.eta, branch=branch, label="failed",
                   photon_number=state.photon_number, beta1_sq=state.beta1_sq,
                   mean_u=state.mean_u, mu=state.mu)
    try:
        fm = build_matrix(state)
        ms = eigendecompose(fm)
        row.label = stability(ms).value
        ph, at = optomechanical_modes(ms)
        row.photon_mode = complex(ms.eigenvalues[ph])
        row.atom_mode = complex(ms.eigenvalues[at])
        if (correlations and row.label == Stability.COOLING.value
                and state.representation is Representation.TWO_MODE):
            c = corr.quadrature_covariance(corr.steady_correlations(ms, dps=dps))
            row.n_ph_nonclassical = corr.nonclassical_photon_number(c)
            row.depletion = corr.depletion(c)
            row.log_negativity = corr.log_negativity(c)
    except (CavityBECError, ValueError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def detuning_sweep(params: PhysicalParams, delta_range, n_steps: int = 400,
                   representation="two_mode", *, grid: GridConfig | None = None,
                   correlations: bool = True, dps: int | None = corr.DEFAULT_DPS,
                   jump_threshold: float = 0.25, refine_tol: float = 1e-3,
                   **solver_kwargs) -> list[SweepRow]:
    """Sweep ``Delta_C`` over ``delta_range`` at fixed ``params.eta``.

    Runs both continuation directions, merges them (one row per distinct
    solution and detuning), and analyses every converged state.  Solver
    failures are recorded as rows with ``label == "failed"``.

    Returns
    -------
    list of SweepRow
        Sorted by detuning, low branch before high branch.
    """
    up, down = sweep_branches(params, delta_range, n_steps, representation, grid=grid,
                              jump_threshold=jump_threshold, refine_tol=refine_tol,
                              **solver_kwargs)
    rows = []
    for d, states in _paired_states(up, down):
        for name, state in states:
            rows.append(analyse_state(state, name, correlations=correlations, dps=dps))
    failed = {d for d, _ in up.failures} & {d for d, _ in down.failures}
    messages = dict(up.failures)
    for d in sorted(failed):
        rows.append(SweepRow(delta_c=d, eta=params.eta, branch="unique", label="failed",
                             error=messages[d]))
    rows.sort(key=lambda r: (r.delta_c, {"low": 0, "unique": 1, "high": 2}[r.branch]))
    return rows


def find_turning_points(*branches: Branch, tol: float = 1e-3) -> list[float]:
    """Detunings at which the given branches terminate.

    Each endpoint is the last detuning on the branch before its photon
    number jumps, bisected to a bracket of width ``tol``.  Branches without
    a jump contribute nothing.
    """
    points = []
    for branch in branches:
        if branch.endpoint is None:
            continue
        a, b = branch.endpoint, branch.jump_delta
        if abs(b - a) > tol and branch._solve is not None:
            a, sa, b, _, is_jump = _bisect_jump(branch._solve, a, branch.endpoint_state, b, tol,
                                                branch._jump_threshold)
            branch.endpoint, branch.endpoint_state, branch.jump_delta = a, sa, b
        points.append(float(branch.endpoint))
    return sorted(points)


def bistable_width(params: PhysicalParams, delta_range=(15000.0, 35000.0), n_steps: int = 400,
                   representation="two_mode", **kwargs) -> tuple[float, Optional[tuple]]:
    """Width of the bistable window and its ``(low, high)`` edges (or ``None``)."""
    up, down = sweep_branches(params, delta_range, n_steps, representation, **kwargs)
    if up.endpoint is None or down.endpoint is None or up.endpoint <= down.endpoint:
        return 0.0, None
    return up.endpoint - down.endpoint, (down.endpoint, up.endpoint)


# ---------------------------------------------------------------------------
# Phase diagram
# ---------------------------------------------------------------------------

def _classify_line(args) -> list[PhasePoint]:
    params, delta_range, n_delta, representation, grid, jump_threshold = args
    up, down = sweep_branches(params, delta_range, n_delta, representation, grid=grid,
                              jump_threshold=jump_threshold)
    states_up = dict(zip((float(d) for d in up.delta_c), up.states))
    states_down = dict(zip((float(d) for d in down.delta_c), down.states))
    points = []
    for d in np.linspace(delta_range[0], delta_range[1], n_delta):
        d = float(d)
        su, sd = states_up.get(d), states_down.get(d)
        if su is not None and sd is not None and _relative_jump(su, sd) > jump_threshold:
            phase = PhaseClass.BISTABLE
        elif su is None and sd is None:
            phase = PhaseClass.FAILED
        else:
            try:
                ms = eigendecompose(build_matrix(su if su is not None else sd))
                phase = PhaseClass(stability(ms).value)
            except (CavityBECError, ValueError):
                phase = PhaseClass.FAILED
        points.append(PhasePoint(d, params.eta, phase))
    return points


def phase_diagram(params: PhysicalParams, delta_range, eta_range, grid: Sequence[int] = (40, 40),
                  representation="two_mode", *, workers: int = 1,
                  grid_config: GridConfig | None = None,
                  jump_threshold: float = 0.25) -> list[PhasePoint]:
    """Classify every point of a ``(Delta_C, eta)`` mesh.

    Parameters
    ----------
    params : PhysicalParams
        Fixed parameters (``delta_c`` and ``eta`` are overridden).
    delta_range, eta_range : (float, float)
    grid : (n_delta, n_eta)
    representation : str
    workers : int
        Number of processes used for independent ``eta`` lines.

    Returns
    -------
    list of PhasePoint
        Ordered by ``(eta, delta_c)``.
    """
    n_delta, n_eta = (int(v) for v in grid)
    if n_delta < 2 or n_eta < 1:
        raise ValueError("phase diagram needs at least 2 detunings and 1 drive value")
    e_lo, e_hi = (float(v) for v in eta_range)
    if not (math.isfinite(e_lo) and math.isfinite(e_hi)) or e_hi < e_lo or (n_eta > 1 and e_hi == e_lo):
        raise ValueError("eta_range must be a finite, nonempty interval")
    etas = np.linspace(e_lo, e_hi, n_eta) if n_eta > 1 else np.array([e_lo])
    jobs = [(params.replace(eta=float(e)), tuple(delta_range), n_delta, representation,
             grid_config, jump_threshold) for e in etas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            lines = list(pool.map(_classify_line, jobs))
    else:
        lines = [_classify_line(job) for job in jobs]
    return [pt for line in lines for pt in line]


def find_critical_point(params: PhysicalParams, eta_bracket, delta_range=(15000.0, 35000.0),
                        n_steps: int = 400, *, width_tol: float = 1e-2, eta_rtol: float = 1e-6,
                        representation="two_mode", **kwargs) -> tuple[float, float]:
    """Bisect on ``eta`` for the onset of bistability.

    The bistable window must be empty at ``eta_bracket[0]`` and nonempty
    at ``eta_bracket[1]``.  Bisection stops when the window at the upper
    end is narrower than ``width_tol`` or the bracket is narrower than
    ``eta_rtol`` (relative).  A window only counts when its photon-number
    jump exceeds the continuation's jump threshold.

    Returns
    -------
    (delta_c_crit, eta_crit)
        Midpoint of the narrowest window found, and the bracket midpoint.
    """
    lo, hi = (float(v) for v in eta_bracket)

    def width(eta):
        return bistable_width(params.replace(eta=eta), delta_range, n_steps, representation,
                              **kwargs)

    w_lo, _ = width(lo)
    w_hi, edges = width(hi)
    if w_lo > 0 or w_hi <= 0:
        raise ValueError("eta bracket does not straddle the onset of bistability")
    while w_hi >= width_tol and hi - lo > eta_rtol * hi:
        mid = 0.5 * (lo + hi)
        w_mid, e_mid = width(mid)
        if w_mid > 0:
            hi, w_hi, edges = mid, w_mid, e_mid
        else:
            lo = mid
    return 0.5 * (edges[0] + edges[1]), 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

FIG2_COLUMNS = ("delta_c", "photon_number", "beta1_sq", "mean_u", "mu", "converged",
                "branch", "stability")
FIG4_COLUMNS = ("delta_c", "re_omega", "im_omega", "flags")
FIG5_COLUMNS = ("delta_c", "eta", "class")


def _writer(fmt):
    if fmt == "csv":
        return write_csv
    if fmt == "json":
        return write_json
    raise ValueError(f"unknown output format {fmt!r}")


def _params_dict(params):
    return None if params is None else params.as_dict()


def write_fig2(rows: Sequence[SweepRow], target, params=None, fmt="csv"):
    """Photon number curve: one line per converged state."""
    data = [(r.delta_c, r.photon_number, r.beta1_sq, r.mean_u, r.mu, True, r.branch, r.label)
            for r in rows if math.isfinite(r.photon_number)]
    return _writer(fmt)(target, FIG2_COLUMNS, data, params=_params_dict(params))


def fig4_rows(rows: Sequence[SweepRow]) -> list[tuple]:
    """Spectrum rows of the two optomechanical modes of every analysed state."""
    data = []
    for r in rows:
        if r.photon_mode is None:
            continue
        for name, w in (("photon_like", r.photon_mode), ("atom_like", r.atom_mode)):
            flags = f"{name}|{r.branch}|photon_coupled"
            if r.label == "heating" and w.imag > 0:
                flags += "|unstable"
            data.append((r.delta_c, w.real, w.imag, flags))
    return data


def write_fig4(rows: Sequence[SweepRow], target, params=None, fmt="csv"):
    return _writer(fmt)(target, FIG4_COLUMNS, fig4_rows(rows), params=_params_dict(params))


def write_fig5(points: Sequence[PhasePoint], target, params=None, fmt="csv", comments=()):
    data = [(p.delta_c, p.eta, p.phase.value) for p in points]
    return _writer(fmt)(target, FIG5_COLUMNS, data, params=_params_dict(params),
                        comments=comments)


def write_fig6_8(rows: Sequence[SweepRow], target, params=None, fmt="csv"):
    """Correlation quantities on cooling rows."""
    data = [(r.delta_c, r.photon_number, r.n_ph_nonclassical, r.depletion, r.log_negativity,
             r.branch) for r in rows if r.n_ph_nonclassical is not None]
    return _writer(fmt)(target, corr.CORRELATION_COLUMNS, data, params=_params_dict(params))
