"""Command-line front end.

    qmem validate|simulate|compare|hjb|oracle <config.json> [--out DIR] [--dt X] [--eps X]

Exit codes: 0 pass, 2 validation failure, 3 numeric failure, 64 usage.
Verbosity follows the ``QMEM_LOG`` environment variable (a logging level name).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .aux_system import SampledControl, Trajectory, ZeroControl, eval_fg, simulate
from .coefficients import build_coefficients
from .config import ScenarioConfig, build_spec, load_config, penalty_weights
from .constants import GENERATOR_TOL, STRUCTURAL_TOL
from .errors import ConfigError, NumericOverflowError, QmemError
from .hjb import (
    hjb_control,
    hjb_residual,
    make_expansion,
    pontryagin_diagnostic,
    psi0_eval,
    psi1_eval,
    simulate_hjb,
)
from .oracle import diffusion_check, drift_check, propagate_density, regression_two_point
from .pointwise import PenaltyWeights, pointwise_control
from .structure import check_admissible, derive_structure, mean_from_state, pauli_basis

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64

DIFFUSION_TOL = 1e-12
PATH_TOL = 1e-6
G_TOL = 1e-10
SCALING_FLOOR = 1e-8
RESIDUAL_RATIO_BAND = (3.5, 4.5)
PONTRYAGIN_RATIO_BAND = (3.0, 5.0)
DEFAULT_SWEEP = (0.1, 0.05, 0.025)

log = logging.getLogger("qmem")


def fmt(x: float) -> str:
    """17 significant digits: every double round-trips."""
    return format(float(x), ".17g")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def print_table(header: Sequence[str], rows) -> None:
    cells = [[v if isinstance(v, str) else f"{v:.6e}" for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in cells:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))


def _ratios(values: Sequence[float]) -> list[float]:
    out = [float("nan")]
    for a, b in zip(values, values[1:]):
        out.append(a / b if b > 0 else float("nan"))
    return out


def _scaling_ok(values: Sequence[float], band: tuple[float, float]) -> bool:
    if max(values) <= SCALING_FLOOR:
        return True
    ratios = _ratios(values)[1:]
    return all(band[0] <= q <= band[1] for q in ratios)


def _out_dir(cfg: ScenarioConfig) -> Path:
    out = Path(cfg.output or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("output", f"cannot create {out}: {exc.strerror}") from None
    return out


# -- validate --------------------------------------------------------------


@dataclass
class Check:
    name: str
    error: float
    tolerance: float
    status: str  # pass | FAIL | skipped


def run_checks(cfg: ScenarioConfig) -> list[Check]:
    """Structural, state, selection and oracle checks in a fixed order."""
    checks: list[Check] = []

    def add(name, err, tol):
        checks.append(Check(name, float(err), tol, "pass" if err <= tol else "FAIL"))

    basis = pauli_basis(cfg.qubits)
    x = basis.matrices
    sc = derive_structure(basis, tol=np.inf)
    d = basis.d
    eye = np.eye(d)
    comm = closure = 0.0
    for j in range(basis.n):
        for k in range(basis.n):
            xx = x[j] @ x[k]
            rebuilt = sc.alpha[j, k] * eye + np.tensordot(sc.beta[j, k], x, axes=(0, 0))
            closure = max(closure, float(np.abs(xx - rebuilt).max()))
            lhs = xx - x[k] @ x[j]
            rhs = 2j * np.tensordot(sc.theta[j, k], x, axes=(0, 0))
            comm = max(comm, float(np.abs(lhs - rhs).max()))
    add("ccr", comm, STRUCTURAL_TOL)
    add("closure", closure, STRUCTURAL_TOL)

    try:
        mu0 = mean_from_state(basis, cfg.rho0) if cfg.rho0 is not None else cfg.mu0
        lam = check_admissible(sc, mu0).min_eigenvalue
        add("state-admissibility", max(0.0, -lam), 1e-10)
    except QmemError as exc:
        log.warning("initial state rejected: %s", exc)
        checks.append(Check("state-admissibility", float("inf"), 1e-10, "FAIL"))

    sv = np.linalg.svd(cfg.F, compute_uv=False)
    deficiency = int(np.sum(sv <= sv[0] * max(cfg.F.shape) * np.finfo(float).eps)) if sv[0] > 0 else len(sv)
    add("selection-rank", deficiency, 0)

    downstream = ("g-at-z0", "oracle-drift", "oracle-diffusion")
    if any(c.status != "pass" for c in checks):
        checks.extend(Check(name, float("nan"), 0.0, "skipped") for name in downstream)
        return checks
    spec = build_spec(cfg)
    coeffs = build_coefficients(spec)
    _, g = eval_fg(coeffs, coeffs.z0)
    add("g-at-z0", float(np.abs(g).max()), G_TOL)
    probes = [np.zeros(spec.r)] + list(np.eye(spec.r))
    add("oracle-drift", max(drift_check(spec, coeffs, U, allow_large=True) for U in probes), GENERATOR_TOL)
    add("oracle-diffusion", diffusion_check(spec, coeffs, allow_large=True), DIFFUSION_TOL)
    return checks


def cmd_validate(cfg: ScenarioConfig) -> int:
    checks = run_checks(cfg)
    print_table(
        ["check", "max_error", "tolerance", "status"],
        [[c.name, c.error, c.tolerance, c.status] for c in checks],
    )
    failed = [c.name for c in checks if c.status == "FAIL"]
    if failed:
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


# -- simulate --------------------------------------------------------------


def _load_control_file(path: str, base: Path | None, r: int) -> SampledControl:
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("control", f"cannot read {p}: {exc.strerror}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines and lines[0].lstrip().startswith("t"):
        lines = lines[1:]
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines])
    except ValueError:
        raise ConfigError("control", f"{p}: non-numeric sample") from None
    if data.ndim != 2 or data.shape[1] != r + 1:
        raise ConfigError("control", f"{p}: expected columns t,U_1..U_{r}")
    try:
        return SampledControl(data[:, 0], data[:, 1:])
    except QmemError as exc:
        raise ConfigError("control", f"{p}: {exc}") from None


def run_control(cfg: ScenarioConfig, base: Path | None = None) -> Trajectory:
    """Simulate the auxiliary system under the configured control kind."""
    spec = build_spec(cfg)
    coeffs = build_coefficients(spec)
    kind = cfg.control
    if kind == "hjb1":
        expansion = make_expansion(coeffs, cfg.Gamma, cfg.horizon, cfg.dt, epsilon=cfg.epsilon)
        Pi = cfg.Gamma / (2 * cfg.epsilon)
        return simulate(coeffs, hjb_control(expansion, cfg.epsilon), cfg.horizon, cfg.dt, Pi=Pi)
    weights = penalty_weights(cfg)
    if kind == "pointwise":
        control = pointwise_control(coeffs, weights)
    elif kind == "zero":
        control = ZeroControl(spec.r)
    else:
        control = _load_control_file(cfg.control_file, base, spec.r)
        if not control.covers(cfg.horizon):
            raise ConfigError("control", "sampled control does not cover [0, horizon]")
    return simulate(coeffs, control, cfg.horizon, cfg.dt, Pi=weights.Pi)


def write_trajectory(path: Path, traj: Trajectory, with_z: bool = False) -> None:
    n = traj.z.shape[1]
    r = traj.U.shape[1]
    header = ["t", "Delta", "penalty", "Phi"] + [f"U_{k + 1}" for k in range(r)]
    if with_z:
        header += [f"z_{j + 1}_{k}" for j in range(n) for k in range(n + 1)]
    phi = traj.phi
    rows = []
    for i, t in enumerate(traj.times):
        row = [t, traj.delta[i], traj.penalty[i], phi[i], *traj.U[i]]
        if with_z:
            row += list(traj.z[i].ravel())
        rows.append(row)
    write_csv(path, header, rows)


def cmd_simulate(cfg: ScenarioConfig, base: Path | None = None, with_z: bool = False) -> int:
    out = _out_dir(cfg) / "trajectory.csv"
    try:
        traj = run_control(cfg, base)
    except NumericOverflowError as exc:
        partial = getattr(exc, "trajectory", None)
        if partial is not None:
            write_trajectory(out, partial, with_z)
            print(f"partial trajectory written to {out}", file=sys.stderr)
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_trajectory(out, traj, with_z)
    fin = traj.final
    print(f"control={cfg.control} Delta={fin['Delta']:.10g} penalty={fin['penalty']:.10g} Phi={fin['Phi']:.10g}")
    print(f"wrote {out}")
    return EXIT_OK


# -- compare ---------------------------------------------------------------


def _require_scaled_penalty(cfg: ScenarioConfig) -> None:
    if cfg.Gamma is None:
        raise ConfigError("penalty", "this command needs the penalty as Gamma and epsilon")


def compare_rows(cfg: ScenarioConfig, expansion=None) -> tuple[list[list], float, float]:
    """``(rows, Psi0(0, z0), Psi1(0, z0))``; rows are ``[name, Delta, penalty, Phi]``."""
    _require_scaled_penalty(cfg)
    spec = build_spec(cfg)
    coeffs = build_coefficients(spec)
    eps = cfg.epsilon
    weights = PenaltyWeights.scaled(cfg.Gamma, eps)
    if expansion is None:
        expansion = make_expansion(coeffs, cfg.Gamma, cfg.horizon, cfg.dt, epsilon=eps)
    rows = []
    for name, control in (
        ("zero", ZeroControl(spec.r)),
        ("pointwise", pointwise_control(coeffs, weights)),
        ("hjb1", hjb_control(expansion, eps)),
    ):
        traj = simulate(coeffs, control, cfg.horizon, cfg.dt, Pi=weights.Pi)
        fin = traj.final
        rows.append([name, fin["Delta"], fin["penalty"], fin["Phi"]])
    psi0 = psi0_eval(expansion, 0.0, coeffs.z0)[0]
    psi1 = psi1_eval(expansion, 0.0, coeffs.z0)[0]
    return rows, psi0, psi1


def cmd_compare(cfg: ScenarioConfig, sweep: Sequence[float] | None = None) -> int:
    _require_scaled_penalty(cfg)
    out = _out_dir(cfg)
    coeffs = build_coefficients(build_spec(cfg))
    expansion = make_expansion(coeffs, cfg.Gamma, cfg.horizon, cfg.dt, epsilon=cfg.epsilon)
    try:
        rows, psi0, psi1 = compare_rows(cfg, expansion)
    except NumericOverflowError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    nan = float("nan")
    rows += [["psi0", nan, nan, psi0], ["psi0+eps*psi1", nan, nan, psi0 + cfg.epsilon * psi1]]
    header = ["name", "Delta", "penalty", "Phi"]
    write_csv(out / "compare.csv", header, rows)
    print(f"eps={cfg.epsilon:g}")
    print_table(header, rows)
    if sweep:
        sweep_rows = []
        for eps in sweep:
            res = simulate_hjb(expansion, eps, cfg.dt)
            pw = simulate(
                coeffs,
                pointwise_control(coeffs, PenaltyWeights.scaled(cfg.Gamma, eps)),
                cfg.horizon,
                cfg.dt,
                Pi=cfg.Gamma / (2 * eps),
            )
            sweep_rows.append([eps, res.phi, res.reference, res.defect, float(pw.phi[-1])])
        ratios = _ratios([r[3] for r in sweep_rows])
        sweep_rows = [r[:4] + [q] + r[4:] for r, q in zip(sweep_rows, ratios)]
        sweep_header = ["eps", "Phi_hjb1", "reference", "defect", "defect_ratio", "Phi_pointwise"]
        write_csv(out / "eps_sweep.csv", sweep_header, sweep_rows)
        print()
        print_table(sweep_header, sweep_rows)
    return EXIT_OK


# -- hjb -------------------------------------------------------------------


def cmd_hjb(cfg: ScenarioConfig) -> int:
    """Bellman terms at ``(0, z0)``, residual scaling and Pontryagin drift for eps, eps/2, eps/4."""
    _require_scaled_penalty(cfg)
    out = _out_dir(cfg)
    coeffs = build_coefficients(build_spec(cfg))
    tau = cfg.horizon
    expansion = make_expansion(coeffs, cfg.Gamma, tau, cfg.dt, epsilon=cfg.epsilon)
    psi0 = psi0_eval(expansion, 0.0, coeffs.z0)[0]
    psi1 = psi1_eval(expansion, 0.0, coeffs.z0)[0]
    eps_list = [cfg.epsilon / 2**k for k in range(3)]
    probe_times = (0.25 * tau, 0.5 * tau, 0.75 * tau)

    residuals = [
        max(hjb_residual(expansion, t, coeffs.z0, eps, time_derivative="exact") for t in probe_times)
        for eps in eps_list
    ]
    drifts, phis, defects = [], [], []
    try:
        for eps in eps_list:
            res = simulate_hjb(expansion, eps, cfg.dt)
            drifts.append(pontryagin_diagnostic(expansion, eps, res.trajectory))
            phis.append(res.phi)
            defects.append(res.defect)
    except NumericOverflowError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    write_csv(out / "hjb_summary.csv", ["quantity", "value"], [["psi0", psi0], ["psi1", psi1]])
    res_rows = [[e, v, q] for e, v, q in zip(eps_list, residuals, _ratios(residuals))]
    write_csv(out / "hjb_residuals.csv", ["eps", "residual", "ratio"], res_rows)
    pon_rows = [
        [e, v, q, p, dfc] for e, v, q, p, dfc in zip(eps_list, drifts, _ratios(drifts), phis, defects)
    ]
    write_csv(out / "pontryagin.csv", ["eps", "drift", "ratio", "Phi", "defect"], pon_rows)

    print(f"psi0(0,z0) = {psi0:.12g}")
    print(f"psi1(0,z0) = {psi1:.12g}")
    print()
    print_table(["eps", "residual", "ratio"], res_rows)
    print()
    print_table(["eps", "drift", "ratio", "Phi", "defect"], pon_rows)
    ok = _scaling_ok(residuals, RESIDUAL_RATIO_BAND) and _scaling_ok(drifts, PONTRYAGIN_RATIO_BAND)
    if not ok:
        print("scaling outside the expected second-order band", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# -- oracle ----------------------------------------------------------------


def oracle_rows(cfg: ScenarioConfig, base: Path | None = None) -> list[list]:
    """``[name, max_error, tolerance]`` for drift, diffusion, mean path and two-point path.

    Feedback controls are replayed as the open-loop signal they produced.
    """
    spec = build_spec(cfg)
    coeffs = build_coefficients(spec)
    tau, dt = cfg.horizon, cfg.dt
    if cfg.control == "zero":
        control = ZeroControl(spec.r)
    elif cfg.control_file is not None:
        control = _load_control_file(cfg.control_file, base, spec.r)
    else:
        traj = run_control(cfg, base)
        control = SampledControl(traj.times, traj.U)
    probes = [np.zeros(spec.r)] + list(np.eye(spec.r))
    drift = max(drift_check(spec, coeffs, U) for U in probes)
    diffusion = diffusion_check(spec, coeffs)
    path = simulate(coeffs, control, tau, dt)
    density = propagate_density(spec, control, tau, dt)
    _, two = regression_two_point(spec, control, tau, dt)
    return [
        ["drift", drift, GENERATOR_TOL],
        ["diffusion", diffusion, DIFFUSION_TOL],
        ["mean-path", float(np.abs(density.mu - path.z[:, :, 0]).max()), PATH_TOL],
        ["two-point", float(np.abs(two - path.z[:, :, 1:]).max()), PATH_TOL],
    ]


def cmd_oracle(cfg: ScenarioConfig, base: Path | None = None) -> int:
    rows = oracle_rows(cfg, base)
    table = [[name, err, tol, "pass" if err <= tol else "FAIL"] for name, err, tol in rows]
    print_table(["check", "max_error", "tolerance", "status"], table)
    if cfg.output is not None:
        write_csv(_out_dir(cfg) / "oracle.csv", ["check", "max_error", "tolerance"], rows)
    return EXIT_OK if all(err <= tol for _, err, tol in rows) else EXIT_NUMERIC


# -- entry point -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (np.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmem", description="Control synthesis for quantum memory systems.")
    parser.add_argument("--version", action="version", version=f"qmem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "validate": "structural, state and oracle checks",
        "simulate": "write trajectory.csv for the configured control",
        "compare": "zero, pointwise and first-order HJB controls at a shared penalty",
        "hjb": "Bellman terms, residual scaling and Pontryagin drift",
        "oracle": "matrix-representation checks of drift, diffusion and moment paths",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="scenario JSON file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--dt", type=_positive_float, help="RK4 step (overrides the config)")
        p.add_argument("--eps", type=_positive_float, help="penalty scale (overrides the config)")
        if name == "simulate":
            p.add_argument("--control", help="zero, pointwise, hjb1 or file:<path>")
            p.add_argument("--with-z", action="store_true", help="append the auxiliary state columns")
        if name == "compare":
            p.add_argument(
                "--sweep",
                nargs="*",
                type=_positive_float,
                metavar="EPS",
                help=f"also run an eps sweep (default {' '.join(map(str, DEFAULT_SWEEP))})",
            )
    return parser


def _configure_logging() -> None:
    level = os.environ.get("QMEM_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    base = Path(args.config).resolve().parent
    try:
        cfg = load_config(args.config).with_overrides(
            dt=args.dt, eps=args.eps, output=args.out, control=getattr(args, "control", None)
        )
        log.info("loaded %s: q=%d control=%s dt=%g", args.config, cfg.qubits, cfg.control, cfg.dt)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, base, with_z=args.with_z)
        if args.command == "compare":
            sweep = None if args.sweep is None else (args.sweep or list(DEFAULT_SWEEP))
            return cmd_compare(cfg, sweep)
        if args.command == "hjb":
            return cmd_hjb(cfg)
        return cmd_oracle(cfg, base)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericOverflowError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QmemError as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
