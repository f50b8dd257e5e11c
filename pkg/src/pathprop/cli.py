"""Command-line front end: ``pathprop {kernel,verify,converge,evolve}``.

Settings come from built-in defaults, then a flat JSON file given with
``--config``, then command-line flags (later sources win).  Exit codes:
0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .classical import BoundaryData, classical_action_free, classical_action_linear
from .core import PhysicsConfig, centered_grid, gaussian_packet, norm, write_field_csv
from .errors import ConvergenceFailure, PathPropError, ResolutionError
from .evolve import evolve_wavefunction, mean_wavenumber, packet_width
from .kernels import FREE, KernelSpec, free_kernel, kernel
from .lattice import convergence_study
from .quadrature import OscillatoryQuadratureConfig, momentum_kernel_ladder
from .report import ResidualReport, fit_order, sig9
from .verification import CHECKS, GRID_CHECKS, run_check

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "dim": 1, "mass": 1.0, "hbar": 1.0, "seed": 0, "out": None,
    # kernel / converge
    "x0": None, "x": None, "dx": None, "T": None, "V0": None, "F": None, "x_ref": None,
    # verify
    "only": None, "spacing": None,
    # converge
    "kind": "lattice", "N_list": "2,4,8,16", "eps_ladder": None, "samples": None,
    "cutoff": None,
    # evolve
    "sigma0": 1.0, "k0": 0.0, "center": 0.0, "half_width": 12.0, "snapshots": 4,
    "taper": 0.2,
}


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    return f"{x:.9g}"


def _vector(text, dim: int, name: str) -> np.ndarray:
    if isinstance(text, (int, float)):
        vals = [float(text)]
    elif isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None
    if len(vals) == 1:
        return np.full(dim, vals[0])
    if len(vals) != dim:
        raise UsageError(f"--{name} has {len(vals)} components but --dim is {dim}")
    return np.array(vals)


def _int_list(text, name: str) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated integers, got {text!r}") from None


def _float_list(text, name: str) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge defaults, the ``--config`` file and explicit flags."""
    settings = dict(DEFAULTS)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a flat JSON object")
        for k, v in data.items():
            key = k.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"unknown config key {k!r}")
            settings[key] = v
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            settings[k] = v
    if settings["dim"] not in (1, 2, 3):
        raise UsageError("--dim must be 1, 2 or 3")
    return settings


def _physics(s: dict) -> PhysicsConfig:
    return PhysicsConfig(mass=float(s["mass"]), hbar=float(s["hbar"]), dim=int(s["dim"]))


def _spec(s: dict, dim: int) -> KernelSpec:
    if s["V0"] is None and s["F"] is None:
        return FREE
    V0 = float(s["V0"] or 0.0)
    F = _vector(s["F"] if s["F"] is not None else 0.0, dim, "F")
    ref = None if s["x_ref"] is None else _vector(s["x_ref"], dim, "x_ref")
    return KernelSpec.linear(V0, F, ref)


def _boundary(s: dict, dim: int, T_default=None) -> BoundaryData:
    T = s["T"] if s["T"] is not None else T_default
    if T is None:
        raise UsageError("--T is required")
    x0 = _vector(s["x0"] if s["x0"] is not None else 0.0, dim, "x0")
    if s["x"] is not None and s["dx"] is not None:
        raise UsageError("give either --x or --dx, not both")
    if s["x"] is not None:
        x = _vector(s["x"], dim, "x")
    else:
        x = x0 + _vector(s["dx"] if s["dx"] is not None else 0.0, dim, "dx")
    return BoundaryData(x0, x, float(T))


def _out_dir(s: dict, required: bool = False) -> Path | None:
    if s["out"] is None:
        if required:
            raise UsageError("--out is required")
        return None
    path = Path(s["out"])
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from None
    return path


def _run_log(out: Path | None, command: str, settings: dict) -> logging.Logger:
    """Sidecar log (the only place timestamps are written)."""
    log = logging.getLogger(f"pathprop.run.{command}")
    log.handlers.clear()
    log.propagate = False
    log.setLevel(logging.INFO)
    if out is not None:
        handler = logging.FileHandler(out / "run.log", mode="w")
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(handler)
    log.info("command=%s settings=%s", command, json.dumps(settings, sort_keys=True, default=str))
    return log


def _close_log(log: logging.Logger):
    for h in list(log.handlers):
        h.close()
        log.removeHandler(h)


# -- subcommands ----------------------------------------------------------------

def cmd_kernel(args) -> int:
    s = resolve_settings(args)
    cfg = _physics(s)
    b = _boundary(s, cfg.dim)
    spec = _spec(s, cfg.dim)
    k = kernel(b, spec, cfg)
    if spec.is_free:
        action = classical_action_free(b, cfg)
    else:
        action = classical_action_linear(b, spec.potential, cfg)
    # a zero potential is reported as free: the numbers are identical too
    shown = FREE if spec.is_free or spec.potential.is_zero else spec
    rows = [
        ("variant", shown.name),
        ("value", f"{fmt(k.value.real)} {fmt(k.value.imag)}"),
        ("modulus", fmt(k.modulus)),
        ("phase", fmt(k.phase)),
        ("action_over_hbar", fmt(action / cfg.hbar)),
    ]
    for key, val in rows:
        print(f"{key}: {val}")
    out = _out_dir(s)
    if out is not None:
        doc = {
            "x0": b.x0.tolist(), "x": b.x.tolist(), "T": b.T, "kernel": shown.describe(),
            "mass": cfg.mass, "hbar": cfg.hbar, "dim": cfg.dim,
            "value": [sig9(k.value.real), sig9(k.value.imag)], "modulus": sig9(k.modulus),
            "phase": sig9(k.phase), "action_over_hbar": sig9(action / cfg.hbar),
        }
        (out / "kernel.json").write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    s = resolve_settings(args)
    cfg = _physics(s)
    names = list(CHECKS)
    if s["only"]:
        names = [n.strip() for n in str(s["only"]).split(",") if n.strip()]
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise UsageError(f"unknown check(s) {unknown}; choose from {list(CHECKS)}")
    out = _out_dir(s) or _out_dir({**s, "out": "reports"})
    log = _run_log(out, "verify", s)
    failures = []
    print(f"{'check':<18} {'pass':<5} {'max residual':>14}  fitted order")
    for name in names:
        opts = {}
        if s["spacing"] is not None and name in GRID_CHECKS:
            opts["spacing"] = float(s["spacing"])
        rep = run_check(name, cfg, seed=int(s["seed"]), **opts)
        rep.write(out)
        worst = max((float(r) for r in rep.residuals), default=float("nan"))
        order = "-" if rep.fitted_order is None else fmt(rep.fitted_order)
        print(f"{name:<18} {str(rep.passed):<5} {fmt(worst):>14}  {order}")
        log.info("check=%s pass=%s", name, rep.passed)
        if not rep.passed:
            failures.append((name, rep))
    for name, rep in failures:
        msg = rep.params.get("message")
        extra = f": {msg}" if msg else ""
        if "required_spacing" in rep.params:
            extra += f" (required spacing {fmt(rep.params['required_spacing'])})"
        print(f"FAILED {name}{extra}", file=sys.stderr)
    log.info("reports=%d failures=%d", len(names), len(failures))
    _close_log(log)
    return EXIT_FAIL if failures else EXIT_OK


def _write_converge_csv(path: Path, column: str, xs, residuals, order):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([column, "residual", "fitted_order"])
    for x, r in zip(xs, residuals):
        w.writerow([fmt(x) if isinstance(x, float) else x, fmt(r),
                    "" if order is None else fmt(order)])
    path.write_text(buf.getvalue())


def cmd_converge(args) -> int:
    s = resolve_settings(args)
    cfg = _physics(s)
    b = _boundary(s, cfg.dim, T_default=1.0)
    spec = _spec(s, cfg.dim)
    out = _out_dir(s)
    kind = s["kind"]
    if kind == "lattice":
        N_list = _int_list(s["N_list"], "N-list")
        rep = convergence_study(b, N_list, spec, cfg)
        xs, column, base = N_list, "N", f"converge_lattice_{spec.name}"
    elif kind == "eps":
        if not spec.is_free:
            raise UsageError("the regulator study applies to the free kernel only")
        qkw = {}
        if s["eps_ladder"] is not None:
            qkw["eps_ladder"] = tuple(_float_list(s["eps_ladder"], "eps-ladder"))
        if s["samples"] is not None:
            qkw["samples"] = int(s["samples"])
        if s["cutoff"] is not None:
            qkw["cutoff"] = float(s["cutoff"])
        q = OscillatoryQuadratureConfig(**qkw)
        res = momentum_kernel_ladder(b, cfg, q)
        ref = free_kernel(b, cfg).value
        raw = [abs(v - ref) / abs(ref) for v in res.raw]
        order = fit_order(res.eps, raw) if all(r > 0 for r in raw) else None
        extrap = abs(res.value - ref) / abs(ref)
        rep = ResidualReport(
            check="converge_eps",
            params={"x0": b.x0.tolist(), "x": b.x.tolist(), "T": b.T, **res.params,
                    "eps": res.eps, "extrapolated_residual": extrap,
                    "nyquist_ok": res.nyquist_ok, "mass": cfg.mass, "hbar": cfg.hbar},
            residuals=raw, fitted_order=order,
            passed=extrap < 1e-4 and res.nyquist_ok,
        )
        xs, column, base = res.eps, "eps", "converge_eps"
    else:
        raise UsageError(f"--kind must be 'lattice' or 'eps', got {kind!r}")
    for x, r in zip(xs, rep.residuals):
        print(f"{column}={fmt(x) if isinstance(x, float) else x} residual={fmt(r)}")
    order = rep.fitted_order
    print(f"fitted_order={'-' if order is None else fmt(order)} pass={rep.passed}")
    if out is not None:
        log = _run_log(out, "converge", s)
        _write_converge_csv(out / f"{base}.csv", column, xs, rep.residuals, order)
        rep.check = base
        rep.write(out)
        log.info("pass=%s", rep.passed)
        _close_log(log)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_evolve(args) -> int:
    s = resolve_settings(args)
    out = _out_dir(s, required=True)
    cfg = _physics(s)
    T = float(s["T"] if s["T"] is not None else 2.0)
    if T < 0:
        raise UsageError("T must be non-negative")
    snaps = int(s["snapshots"])
    if snaps < 1:
        raise UsageError("--snapshots must be >= 1")
    spacing = float(s["spacing"] if s["spacing"] is not None else 0.05)
    grid = centered_grid(float(s["half_width"]), spacing, cfg.dim)
    spec = _spec(s, cfg.dim)
    psi0 = gaussian_packet(grid, _vector(s["center"], cfg.dim, "center"), float(s["sigma0"]),
                           k0=_vector(s["k0"], cfg.dim, "k0"), cfg=cfg)
    times = [0.0] if T == 0 else [T * i / snaps for i in range(snaps + 1)]
    log = _run_log(out, "evolve", s)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snapshot", "t", "width", "norm", "mean_k"])
    print(f"{'t':>12} {'width':>14} {'norm':>14} {'mean_k':>14}")
    for i, t in enumerate(times):
        psi = evolve_wavefunction(psi0, t, spec, cfg, taper=float(s["taper"]))
        write_field_csv(out / f"snapshot_{i:03d}.csv", psi, cfg)
        row = [packet_width(psi), norm(psi), mean_wavenumber(psi)]
        w.writerow([i, fmt(t)] + [fmt(v) for v in row])
        print(f"{fmt(t):>12} " + " ".join(f"{fmt(v):>14}" for v in row))
        log.info("snapshot=%d t=%s", i, fmt(t))
    (out / "summary.csv").write_text(buf.getvalue())
    _close_log(log)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON settings file (flags override it)")
    common.add_argument("--dim", type=int, choices=(1, 2, 3))
    common.add_argument("--mass", type=float)
    common.add_argument("--hbar", type=float)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for random sample points (default 0)")

    endpoints = argparse.ArgumentParser(add_help=False)
    endpoints.add_argument("--x0", help="start point (scalar or comma list)")
    endpoints.add_argument("--x", help="end point (scalar or comma list)")
    endpoints.add_argument("--dx", help="displacement x - x0 (alternative to --x)")
    endpoints.add_argument("--T", type=float, help="propagation time")
    endpoints.add_argument("--V0", type=float, help="constant potential (selects the linear kernel)")
    endpoints.add_argument("--F", help="constant force (selects the linear kernel)")
    endpoints.add_argument("--x-ref", dest="x_ref", help="expansion point of the potential")

    p = argparse.ArgumentParser(prog="pathprop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", parents=[common, endpoints], help="evaluate a closed-form kernel")
    k.set_defaults(func=cmd_kernel)

    v = sub.add_parser("verify", parents=[common], help="run the verification battery")
    v.add_argument("--only", help=f"comma list from: {', '.join(CHECKS)}")
    v.add_argument("--spacing", type=float, help="grid spacing override for grid-based checks")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("converge", parents=[common, endpoints], help="lattice or regulator convergence")
    c.add_argument("--kind", choices=("lattice", "eps"))
    c.add_argument("--N-list", dest="N_list", help="increasing slice counts, e.g. 2,4,8,16")
    c.add_argument("--eps-ladder", dest="eps_ladder", help="decreasing regulators in units of T/(m hbar)")
    c.add_argument("--samples", type=int, help="momentum samples per axis")
    c.add_argument("--cutoff", type=float, help="momentum cutoff")
    c.set_defaults(func=cmd_converge)

    e = sub.add_parser("evolve", parents=[common], help="evolve a Gaussian packet")
    e.add_argument("--T", type=float, help="final time (default 2)")
    e.add_argument("--sigma0", type=float)
    e.add_argument("--k0", help="wave vector (scalar or comma list)")
    e.add_argument("--center", help="packet centre (scalar or comma list)")
    e.add_argument("--half-width", dest="half_width", type=float, help="grid half-width (default 12)")
    e.add_argument("--spacing", type=float, help="grid spacing (default 0.05)")
    e.add_argument("--snapshots", type=int, help="number of equal time steps to write (default 4)")
    e.add_argument("--taper", type=float, help="cosine taper fraction (default 0.2)")
    e.add_argument("--V0", type=float)
    e.add_argument("--F")
    e.add_argument("--x-ref", dest="x_ref")
    e.set_defaults(func=cmd_evolve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResolutionError, ConvergenceFailure) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except PathPropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
