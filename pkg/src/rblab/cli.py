"""Command line entry point: ``rblab check | lemma | flow``.

Exit codes: 0 pass, 1 usage error, 2 verification failure, 3 numerical blow-up.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

from . import catalog, integrals, rbflow
from .errors import BlowUpError, CFLError, ConfigurationError, DomainError, ParameterError, PreconditionError, RBLabError
from .io import dumps_csv, dumps_json
from .soliton import DEFAULT_TOLERANCES, soliton_residual

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_BLOWUP = 0, 1, 2, 3

EXAMPLE_FLAGS = ("rho", "t", "c", "Z", "a", "b", "h0", "h1", "eps", "amplitude")
LEMMA_TARGETS = integrals.LEMMAS + ("all", "yano", "bochner", "bianchi")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    example: str | None = None
    params: dict = field(default_factory=dict)
    grid: tuple[int, int] | None = None
    tol: float | None = None
    fmt: str = "json"
    out: str | None = None


def _grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 128x256, got {text!r}") from None


def _add_example_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("example parameters")
    for name in ("rho", "t", "c", "a", "b", "h0", "h1", "eps", "amplitude"):
        g.add_argument(f"--{name}", type=float, default=None)
    g.add_argument("--Z", type=str, default=None, help="comma-separated ambient vector, e.g. 0,0,1")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rblab", description="Almost Ricci-Bourguignon soliton laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    chk = sub.add_parser("check", help="verify a catalog example pointwise")
    chk.add_argument("example", choices=sorted(catalog.EXAMPLES))
    _add_example_flags(chk)
    chk.add_argument("--grid", type=_grid, default=None, help="sample grid NxM (default 20x20)")
    chk.add_argument("--tol", type=float, default=None, help="tolerance for every identity")
    chk.add_argument("--format", choices=("json",), default="json")
    chk.add_argument("--out", default=None)

    lem = sub.add_parser("lemma", help="integral identities on a compact example")
    lem.add_argument("target", choices=LEMMA_TARGETS)
    lem.add_argument("--example", required=True, choices=sorted(catalog.EXAMPLES))
    _add_example_flags(lem)
    lem.add_argument("--grid", type=_grid, default=None)
    lem.add_argument("--tol", type=float, default=None, help="base tolerance before L1 scaling")
    lem.add_argument("--format", choices=("csv", "json"), default="csv")
    lem.add_argument("--out", default=None)

    flo = sub.add_parser("flow", help="integrate the conformal RB flow")
    flo.add_argument("--init", required=True, choices=("cigar", "torus-perturb", "flat"))
    flo.add_argument("--rho", type=float, default=0.0)
    flo.add_argument("--T", type=float, default=0.1)
    flo.add_argument("--h", type=float, default=None, help="grid spacing (cigar)")
    flo.add_argument("--n", type=int, default=None, help="nodes per side (periodic runs)")
    flo.add_argument("--dt", default="auto", help="fixed time step or 'auto'")
    flo.add_argument("--amplitude", type=float, default=0.1)
    flo.add_argument("--record-every", type=int, default=1)
    flo.add_argument("--format", choices=("csv", "json"), default="csv")
    flo.add_argument("--out", default=None)
    return ap


def _config(ns: argparse.Namespace) -> RunConfig:
    params = {}
    for k in EXAMPLE_FLAGS:
        v = getattr(ns, k, None)
        if v is not None:
            params[k] = v
    return RunConfig(ns.command, getattr(ns, "example", None), params, getattr(ns, "grid", None),
                     getattr(ns, "tol", None), ns.format, ns.out)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _build(cfg: RunConfig):
    try:
        return catalog.build_example(cfg.example, **cfg.params)
    except (ParameterError, DomainError, KeyError) as exc:
        raise UsageError(str(exc)) from None


def cmd_check(cfg: RunConfig) -> int:
    d = _build(cfg)
    per_axis = cfg.grid if cfg.grid is not None else 20
    tol = None if cfg.tol is None else {k: cfg.tol for k in DEFAULT_TOLERANCES}
    try:
        rep = soliton_residual(d, per_axis=per_axis, tolerances=tol)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None
    _emit(rep.to_json(), cfg.out)
    if not rep.passed:
        print(f"rblab: residuals above tolerance: {', '.join(rep.failures)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_lemma(cfg: RunConfig, target: str) -> int:
    d = _build(cfg)
    if target in integrals.LEMMAS and not d.compact:
        raise UsageError(f"{target} needs a compact example; {d.name!r} is not compact")
    try:
        grid = integrals.grid_for(d, cfg.grid)
    except PreconditionError as exc:
        raise UsageError(str(exc)) from None
    ids = list(integrals.LEMMAS) + ["yano", "bochner"] if target == "all" else [target]
    results, refusals = [], []
    for idn in ids:
        if idn == "yano":
            r = integrals.yano_residual(grid, d.metric, d.xi, d.t, base=cfg.tol)
        elif idn == "bochner":
            r = integrals.bochner_residual(grid, d.metric, d.lam, d.t, base=cfg.tol, d=d)
        elif idn == "bianchi":
            val = integrals.bianchi_sweep(grid, d.metric, d.t)
            tol = 1e-7 if cfg.tol is None else cfg.tol
            r = integrals.IdentityResult("bianchi", val, 0.0, {"max |grad S/2 - div Q|": val}, {}, grid.description, tol)
        else:
            try:
                r = integrals.lemma_residual(idn, d, grid, base=cfg.tol)
            except PreconditionError as exc:
                r = integrals.IdentityResult(idn, 0.0, 0.0, grid=grid.description, refused=str(exc))
                refusals.append(f"{idn}: {exc}")
        results.append(r)
    if cfg.fmt == "csv":
        text = dumps_csv(integrals.CSV_HEADER, (r.row() for r in results))
    else:
        text = dumps_json({
            "example": d.name,
            "grid": grid.description,
            "results": [
                {"id": r.id, "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual, "tolerance": r.tolerance,
                 "pass": r.passed, "terms": r.terms, "refused": r.refused}
                for r in results
            ],
        })
    _emit(text, cfg.out)
    for msg in refusals:
        print(f"rblab: refused {msg}", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_flow(ns: argparse.Namespace) -> int:
    try:
        dt = ns.dt if ns.dt == "auto" else float(ns.dt)
    except ValueError:
        raise UsageError(f"--dt must be a number or 'auto', got {ns.dt!r}") from None
    if ns.record_every < 1:
        raise UsageError("--record-every must be >= 1")
    if ns.init == "cigar":
        state = rbflow.cigar_state(ns.h if ns.h is not None else 1.0 / 32, ns.rho)
    elif ns.init == "torus-perturb":
        state = rbflow.torus_perturb_state(ns.n if ns.n is not None else 64, ns.rho, ns.amplitude)
    else:
        state = rbflow.flat_state(ns.n if ns.n is not None else 32, ns.rho)
    traj = rbflow.run(state, ns.T, dt, record_every=ns.record_every)
    if ns.format == "csv":
        text = traj.to_csv()
    else:
        text = dumps_json({
            "init": ns.init, "rho": ns.rho, "T": ns.T, "h": state.h, "steps": traj.steps,
            "trajectory": {k: list(v) for k, v in zip(rbflow.TRAJECTORY_HEADER,
                                                      (traj.time, traj.max_abs_S, traj.area, traj.sup_err))},
        })
    _emit(text, ns.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if ns.command == "check":
            return cmd_check(_config(ns))
        if ns.command == "lemma":
            return cmd_lemma(_config(ns), ns.target)
        return cmd_flow(ns)
    except UsageError as exc:
        print(f"rblab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"rblab: blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (CFLError, ParameterError, DomainError) as exc:
        print(f"rblab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RBLabError as exc:
        print(f"rblab: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
