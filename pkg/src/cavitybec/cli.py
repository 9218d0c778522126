"""Command-line interface.

Subcommands ``meanfield``, ``spectrum``, ``correlations`` and
``phasediagram``.  Parameters come from an optional ``key=value`` config
file (``--config``) and are overridden by command-line flags.

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import correlations as corr
from . import fluctuations as fl
from . import meanfield as mf
from . import sweep as sw
from .exceptions import CavityBECError
from .io import header_lines, write_csv, write_json
from .params import GridConfig, PhysicalParams, read_config

__all__ = ["RunConfig", "build_parser", "resolve_config", "main",
           "cmd_meanfield", "cmd_spectrum", "cmd_correlations", "cmd_phasediagram"]

SUBCOMMANDS = ("meanfield", "spectrum", "correlations", "phasediagram")

PARAM_KEYS = tuple(f.name for f in dataclasses.fields(PhysicalParams))
GRID_KEYS = ("n_points", "n_fourier")
RUN_KEYS = {
    "representation": str, "delta_min": float, "delta_max": float, "n_steps": int,
    "eta_min": float, "eta_max": float, "n_eta": int, "output_dir": str, "format": str,
    "threads": int,
}
DEFAULTS = {
    "representation": "two_mode", "delta_min": 15000.0, "delta_max": 35000.0,
    "n_steps": 400, "eta_min": 0.0, "eta_max": 600.0, "n_eta": 40, "output_dir": ".",
    "format": "csv", "threads": 1,
}
PHASE_DEFAULT_N_DELTA = 40


class UsageError(Exception):
    """Invalid command line or configuration (exit code 2)."""


@dataclass
class RunConfig:
    """Fully resolved settings of one CLI run."""

    subcommand: str
    params: PhysicalParams
    grid: GridConfig
    representation: str = "two_mode"
    delta_range: Optional[tuple] = None
    n_steps: int = 400
    eta_range: tuple = (0.0, 600.0)
    n_eta: int = 40
    output_dir: Path = Path(".")
    fmt: str = "csv"
    threads: int = 1
    flags: dict = field(default_factory=dict)

    def header(self) -> dict:
        """Resolved parameter set written at the top of every output file."""
        out = dict(self.params.as_dict())
        out.update(n_points=self.grid.n_points, n_fourier=self.grid.n_fourier,
                   representation=self.representation)
        if self.subcommand == "phasediagram":
            out.update(delta_min=self.delta_range[0], delta_max=self.delta_range[1],
                       n_delta=self.n_steps, eta_min=self.eta_range[0],
                       eta_max=self.eta_range[1], n_eta=self.n_eta)
        elif self.delta_range is not None:
            out.update(delta_min=self.delta_range[0], delta_max=self.delta_range[1],
                       n_steps=self.n_steps)
        return out


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavitybec",
        description="Mean-field states, fluctuation spectra, correlations and phase diagram "
                    "of a condensate in a driven optical cavity (recoil units).")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value parameter file")
    group = common.add_argument_group("physical parameters (recoil units)")
    for name in PARAM_KEYS:
        group.add_argument(_flag(name), dest=name, type=float, default=None)
    numeric = common.add_argument_group("numerics and output")
    numeric.add_argument("--representation", choices=[r.value for r in mf.Representation],
                         default=None)
    numeric.add_argument("--n-points", dest="n_points", type=int, default=None)
    numeric.add_argument("--n-fourier", dest="n_fourier", type=int, default=None)
    numeric.add_argument("--output-dir", dest="output_dir", default=None)
    numeric.add_argument("--format", choices=("csv", "json"), default=None)
    numeric.add_argument("--threads", type=int, default=None, help="worker processes")

    sweep_args = argparse.ArgumentParser(add_help=False)
    sweep_args.add_argument("--delta-min", dest="delta_min", type=float, default=None)
    sweep_args.add_argument("--delta-max", dest="delta_max", type=float, default=None)
    sweep_args.add_argument("--n-steps", dest="n_steps", type=int, default=None)
    sweep_args.add_argument("--sweep", action="store_true",
                            help="sweep the detuning range (implied by any range flag)")

    p = sub.add_parser("meanfield", parents=[common, sweep_args],
                       help="converged mean-field state or photon-number curve (fig2.csv)")
    p = sub.add_parser("spectrum", parents=[common, sweep_args],
                       help="optomechanical fluctuation spectrum (fig4.csv)")
    p.add_argument("--check-symmetry", action="store_true",
                   help="print max |C M C + M*| over all matrices")
    p = sub.add_parser("correlations", parents=[common, sweep_args],
                       help="photon number, depletion, log-negativity (fig6-8.csv)")
    p.add_argument("--oracle", choices=("lyapunov",), default=None,
                   help="cross-check the mode sum against the Lyapunov solution")
    p = sub.add_parser("phasediagram", parents=[common],
                       help="cooling / heating / bistable classification (fig5.csv)")
    p.add_argument("--delta-min", dest="delta_min", type=float, default=None)
    p.add_argument("--delta-max", dest="delta_max", type=float, default=None)
    p.add_argument("--n-delta", dest="n_steps", type=int, default=None)
    p.add_argument("--eta-min", dest="eta_min", type=float, default=None)
    p.add_argument("--eta-max", dest="eta_max", type=float, default=None)
    p.add_argument("--n-eta", dest="n_eta", type=int, default=None)
    p.add_argument("--find-critical", action="store_true",
                   help="bisect for the onset of bistability and print (delta_c, eta)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file and flags (flags win)."""
    values: dict = {}
    if args.config is not None:
        if not args.config.is_file():
            raise UsageError(f"config file not found: {args.config}")
        try:
            values.update(read_config(args.config))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    allowed = set(PARAM_KEYS) | set(GRID_KEYS) | set(RUN_KEYS)
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    explicit_sweep = getattr(args, "sweep", False)
    for key in allowed:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
            if key in ("delta_min", "delta_max", "n_steps"):
                explicit_sweep = True
        elif key in ("delta_min", "delta_max", "n_steps") and key in values:
            explicit_sweep = True

    try:
        params = PhysicalParams.from_mapping({k: values[k] for k in PARAM_KEYS if k in values})
        grid = GridConfig(**{k: int(values[k]) for k in GRID_KEYS if k in values})
        defaults = dict(DEFAULTS)
        if args.subcommand == "phasediagram":
            defaults["n_steps"] = PHASE_DEFAULT_N_DELTA
        run = {k: RUN_KEYS[k](values.get(k, defaults[k])) for k in RUN_KEYS}
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None

    if run["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    if run["representation"] not in [r.value for r in mf.Representation]:
        raise UsageError(f"unknown representation {run['representation']!r}")
    if run["threads"] < 1:
        raise UsageError("threads must be at least 1")
    sweep_mode = explicit_sweep or args.subcommand == "phasediagram"
    delta_range = None
    if sweep_mode:
        delta_range = (run["delta_min"], run["delta_max"])
        if not (math.isfinite(delta_range[0]) and math.isfinite(delta_range[1])) \
                or delta_range[1] <= delta_range[0]:
            raise UsageError("detuning range is empty")
        if run["n_steps"] < 2:
            raise UsageError("n_steps must be at least 2")
    if args.subcommand == "phasediagram":
        if run["n_eta"] < 1 or run["eta_max"] < run["eta_min"] or (
                run["n_eta"] > 1 and run["eta_max"] == run["eta_min"]):
            raise UsageError("eta range is empty")
    output_dir = Path(run["output_dir"])
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory: {exc}") from None

    flags = {k: getattr(args, k) for k in ("check_symmetry", "oracle", "find_critical")
             if hasattr(args, k)}
    return RunConfig(subcommand=args.subcommand, params=params, grid=grid,
                     representation=run["representation"], delta_range=delta_range,
                     n_steps=run["n_steps"], eta_range=(run["eta_min"], run["eta_max"]),
                     n_eta=run["n_eta"], output_dir=output_dir, fmt=run["format"],
                     threads=run["threads"], flags=flags)


def _out(cfg: RunConfig, stem: str) -> Path:
    return cfg.output_dir / f"{stem}.{cfg.fmt}"


def _write(cfg: RunConfig, stem: str, columns, rows, comments=()):
    writer = write_json if cfg.fmt == "json" else write_csv
    path = _out(cfg, stem)
    writer(path, columns, rows, params=cfg.header(), comments=comments)
    return path


def _solve_single(cfg: RunConfig) -> mf.MeanFieldState:
    kwargs = {"record_energy": True} if cfg.representation != "two_mode" else {}
    return mf.solve(cfg.params, cfg.representation, cfg.grid, **kwargs)


def _sweep(cfg: RunConfig, correlations: bool) -> list[sw.SweepRow]:
    return sw.detuning_sweep(cfg.params, cfg.delta_range, cfg.n_steps, cfg.representation,
                             grid=cfg.grid, correlations=correlations)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

STATE_COLUMNS = ("delta_c", "abs_alpha_sq", "re_alpha", "im_alpha", "mu", "mean_u",
                 "beta1_sq", "converged", "residual", "iterations")


def cmd_meanfield(cfg: RunConfig) -> list[Path]:
    """Converged state (single detuning) or branch curve (sweep)."""
    if cfg.delta_range is not None:
        rows = _sweep(cfg, correlations=False)
        data = [(r.delta_c, r.photon_number, r.beta1_sq, r.mean_u, r.mu, True, r.branch, r.label)
                for r in rows if math.isfinite(r.photon_number)]
        return [_write(cfg, "fig2", sw.FIG2_COLUMNS, data)]

    state = _solve_single(cfg)
    p = cfg.params
    paths = [_write(cfg, "meanfield", STATE_COLUMNS, [(
        p.delta_c, state.photon_number, state.alpha_ss.real, state.alpha_ss.imag, state.mu,
        state.mean_u, state.beta1_sq, state.converged, state.residual, state.iterations)])]
    rep = state.representation
    if rep is mf.Representation.GRID:
        coord = np.arange(state.psi.size) * (math.pi / state.psi.size)
        cols = ("x", "psi")
    elif rep is mf.Representation.FOURIER:
        n_max = (state.psi.size - 1) // 2
        coord = np.arange(-n_max, n_max + 1)
        cols = ("n", "beta")
    else:
        coord = np.array([0, 1])
        cols = ("mode", "beta")
    paths.append(_write(cfg, "wavefunction", cols, list(zip(coord, state.psi))))

    log = cfg.output_dir / "convergence.log"
    lines = header_lines(cfg.header(), ()) + [
        f"representation {rep.value}", f"converged {state.converged}",
        f"iterations {state.iterations}", f"residual {state.residual:.16e}"]
    if state.energy_history is not None:
        lines += [f"step {i} energy {e:.16e}" for i, e in enumerate(state.energy_history)]
    log.write_text("\n".join(lines) + "\n")
    paths.append(log)
    return paths


def cmd_spectrum(cfg: RunConfig) -> list[Path]:
    """Optomechanical mode spectrum along a sweep or at one detuning."""
    if cfg.delta_range is not None:
        rows = _sweep(cfg, correlations=False)
        states = None
    else:
        state = _solve_single(cfg)
        rows = [sw.analyse_state(state, correlations=False)]
        states = [state]
    failures = [r for r in rows if r.error]
    if cfg.flags.get("check_symmetry"):
        if states is None:
            up, down = sw.sweep_branches(cfg.params, cfg.delta_range, cfg.n_steps,
                                         cfg.representation, grid=cfg.grid)
            states = up.states + down.states
        worst = max(fl.symmetry_residual(fl.build_matrix(s)) for s in states)
        print(f"symmetry residual max|CMC + M*| = {worst:.3e}")
    path = _write(cfg, "fig4", sw.FIG4_COLUMNS, sw.fig4_rows(rows))
    for r in failures:
        print(f"warning: delta_c={r.delta_c}: {r.error}", file=sys.stderr)
    return [path]


def cmd_correlations(cfg: RunConfig) -> list[Path]:
    """Nonclassical photon number, depletion and log-negativity (cooling states)."""
    if cfg.representation != "two_mode":
        raise UsageError("correlations are available for the two_mode representation only")
    oracle = cfg.flags.get("oracle")
    if cfg.delta_range is None:
        state = _solve_single(cfg)
        ms = fl.eigendecompose(fl.build_matrix(state))
        c = corr.quadrature_covariance(corr.steady_correlations(ms))  # raises when heating
        rows = [sw.SweepRow(delta_c=cfg.params.delta_c, eta=cfg.params.eta, branch="unique",
                            label="cooling", photon_number=state.photon_number,
                            n_ph_nonclassical=corr.nonclassical_photon_number(c),
                            depletion=corr.depletion(c), log_negativity=corr.log_negativity(c))]
        cooling_states = [state]
    else:
        rows = _sweep(cfg, correlations=True)
        up, down = sw.sweep_branches(cfg.params, cfg.delta_range, cfg.n_steps) if oracle else (None, None)
        cooling_states = []
        if oracle:
            for s in up.states + down.states:
                if fl.stability(fl.eigendecompose(fl.build_matrix(s))) is fl.Stability.COOLING:
                    cooling_states.append(s)
    if oracle:
        worst = 0.0
        for s in cooling_states:
            fm = fl.build_matrix(s)
            c_sum = corr.quadrature_covariance(corr.steady_correlations(fl.eigendecompose(fm)))
            c_lyap = corr.lyapunov_covariance(fm)
            worst = max(worst, float(np.max(np.abs(c_sum.matrix - c_lyap.matrix))))
        print(f"max |C_modesum - C_lyapunov| = {worst:.3e} over {len(cooling_states)} states")
    data = [(r.delta_c, r.photon_number, r.n_ph_nonclassical, r.depletion, r.log_negativity,
             r.branch) for r in rows if r.n_ph_nonclassical is not None]
    return [_write(cfg, "fig6-8", corr.CORRELATION_COLUMNS, data)]


def cmd_phasediagram(cfg: RunConfig) -> list[Path]:
    """Phase diagram over the (delta_c, eta) rectangle."""
    points = sw.phase_diagram(cfg.params, cfg.delta_range, cfg.eta_range,
                              (cfg.n_steps, cfg.n_eta), cfg.representation,
                              workers=cfg.threads, grid_config=cfg.grid)
    comments = []
    if cfg.flags.get("find_critical"):
        widths = {}
        for pt in points:
            widths.setdefault(pt.eta, 0)
            widths[pt.eta] += pt.phase is sw.PhaseClass.BISTABLE
        etas = sorted(widths)
        upper = next((e for e in etas if widths[e] > 0), None)
        if upper is None:
            raise UsageError("no bistable region in the phase diagram; raise --eta-max")
        n_fine = max(cfg.n_steps, 400)
        lower = None
        # the coarse grid can miss narrow windows: confirm the lower end finely
        for e in reversed([e for e in etas if e < upper]):
            w, _ = sw.bistable_width(cfg.params.replace(eta=e), cfg.delta_range, n_fine)
            if w == 0:
                lower = e
                break
            upper = e
        if lower is None:
            raise UsageError("phase diagram does not bracket the onset of bistability; "
                             "lower --eta-min")
        dcrit, ecrit = sw.find_critical_point(cfg.params, (lower, upper), cfg.delta_range,
                                              n_fine)
        print(f"critical point: delta_c = {dcrit:.10g}, eta = {ecrit:.10g}")
        comments.append(f"critical point: delta_c={dcrit:.16e} eta={ecrit:.16e}")
    data = [(p.delta_c, p.eta, p.phase.value) for p in points]
    return [_write(cfg, "fig5", sw.FIG5_COLUMNS, data, comments=comments)]


COMMANDS = {"meanfield": cmd_meanfield, "spectrum": cmd_spectrum,
            "correlations": cmd_correlations, "phasediagram": cmd_phasediagram}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        cfg = resolve_config(args)
        paths = COMMANDS[cfg.subcommand](cfg)
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"cavitybec: error: {exc}", file=sys.stderr)
        return 2
    except CavityBECError as exc:
        print(f"cavitybec: numerical failure: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
