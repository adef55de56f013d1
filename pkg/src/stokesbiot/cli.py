"""Command-line entry point: single runs, convergence studies, energy and projection checks.

Exit codes: 0 success, 1 solver failure, 2 invalid flags.
"""

from __future__ import annotations

import argparse
import io
import logging
import math
import sys

import numpy as np

from . import diagnostics as dg
from .driver import RunConfig, build_systems, run
from .linalg import SingularMatrixError
from .mesh import build_rect_mesh, dump_mesh, Region
from .params import PhysicalParams

log = logging.getLogger(__name__)

MODES = ("single", "temporal", "spatial", "energy", "projections")
FIELDS = ("e_eta", "e_xi", "e_phi", "e_u", "e_p")
TEMPORAL_DT_SCALE = 0.05
SPATIAL_DT, SPATIAL_T = 1e-7, 1e-4
PROJECTION_T = 0.25  # sin and cos of pi*t both nonzero
ENERGY_TOL = 1e-10


class UsageError(Exception):
    pass


def _n_list(text: str) -> list[int]:
    try:
        vals = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--n expects a comma list of integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("--n entries must be positive")
    return vals


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _on_off(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError("expected on or off")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stokesbiot", description=__doc__.splitlines()[0])
    p.add_argument("--mode", choices=MODES, default="single")
    p.add_argument("--n", type=_n_list, default=None, help="comma list of refinements")
    p.add_argument("--dt", type=_positive, default=None)
    p.add_argument("--T", type=_positive, default=None, help="final time")
    p.add_argument("--steps", type=int, default=None, help="number of steps (T = steps*dt)")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--L", type=_positive, default=1.0)
    p.add_argument("--parallel", type=_on_off, nargs="?", const=True, default=True,
                   metavar="{on,off}", help="solve both subproblems concurrently (default on)")
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("interp", "ritz"), default="interp")
    p.add_argument("--refine", type=int, default=1,
                   help="cells per unit length per unit of n (default 1)")
    p.add_argument("--dump-mesh", default=None, metavar="PATH",
                   help="write the fluid and poro meshes for the first n as text")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------


def _g(v) -> str:
    return f"{v:.6g}"


def _rates_block(ns, columns, names) -> list[str]:
    lines = ["pair," + ",".join(f"rate_{c.removeprefix('e_')}" for c in names)]
    rates = [dg.convergence_rates(col) for col in columns]
    for i in range(len(ns) - 1):
        lines.append(f"{ns[i]}:{ns[i + 1]}," + ",".join(_g(r[i]) for r in rates))
    return lines


def _text_table(header, rows) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def _emit(args, csv_lines, text):
    print(text)
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write("\n".join(csv_lines) + "\n")


# --------------------------------------------------------------------------
# modes
# --------------------------------------------------------------------------


def _params(args, dt) -> PhysicalParams:
    try:
        return PhysicalParams(gamma=args.gamma, L=args.L, dt=dt)
    except ValueError as exc:
        raise UsageError(str(exc))


def _final_time(args, dt, default_T=None):
    if args.steps is not None:
        if args.steps < 1:
            raise UsageError("--steps must be positive")
        T = args.steps * dt
        if args.T is not None and not math.isclose(args.T, T, rel_tol=1e-9):
            raise UsageError("--T and --steps*--dt disagree")
        return T
    T = args.T if args.T is not None else default_T
    if T is None:
        raise UsageError("give --T or --steps")
    return T


def _config(args, n, dt, T, **kw) -> RunConfig:
    try:
        return RunConfig(n=n * args.refine, dt=dt, T=T, params=_params(args, dt),
                         parallel=args.parallel, **kw)
    except ValueError as exc:
        raise UsageError(str(exc))


def _error_study(args, plan) -> int:
    """plan: list of (n, dt, T)."""
    reports = []
    for n, dt, T in plan:
        cfg = _config(args, n, dt, T, init=args.init)
        res = run(cfg)
        rep = dg.final_errors(res.final, res.systems.disc, res.systems.case, dt)
        log.info("n=%d done: %s", n, rep.csv_row())
        reports.append(rep)
    csv = [dg.CSV_HEADER] + [r.csv_row() for r in reports]
    rows = [[r.n, _g(r.dt), _g(r.h)] + [f"{v:.3e}" for v in r.values()] for r in reports]
    text = _text_table(["n", "dt", "h", *FIELDS], rows)
    if len(reports) > 1:
        ns = [n for n, _, _ in plan]
        cols = [[getattr(r, f) for r in reports] for f in FIELDS]
        block = _rates_block(ns, cols, FIELDS)
        csv += block
        text += "\n\n" + _text_table(block[0].split(","), [b.split(",") for b in block[1:]])
    _emit(args, csv, text)
    return 0


def mode_single(args) -> int:
    if args.dt is None:
        raise UsageError("single mode needs --dt")
    n_list = args.n or [8]
    T = _final_time(args, args.dt)
    return _error_study(args, [(n, args.dt, T) for n in n_list])


def mode_temporal(args) -> int:
    if args.dt is not None:
        raise UsageError("temporal mode fixes dt = 0.05/n; drop --dt")
    if args.steps is not None:
        raise UsageError("temporal mode takes --T, not --steps")
    n_list = args.n or [8, 16, 32, 64]
    T = args.T if args.T is not None else 1.0
    return _error_study(args, [(n, TEMPORAL_DT_SCALE / n, T) for n in n_list])


def mode_spatial(args) -> int:
    dt = args.dt if args.dt is not None else SPATIAL_DT
    n_list = args.n or [8, 16, 32, 64]
    T = _final_time(args, dt, SPATIAL_T)
    return _error_study(args, [(n, dt, T) for n in n_list])


def mode_energy(args) -> int:
    dt = args.dt if args.dt is not None else 0.1
    steps = args.steps if args.steps is not None else 20
    if args.T is not None:
        raise UsageError("energy mode takes --steps, not --T")
    if steps < 1:
        raise UsageError("--steps must be positive")
    csv = ["n,dt,step,X_prev,X,Y,Z,residual,relative"]
    worst = 0.0
    monotone = True
    for n in args.n or [8]:
        cfg = _config(args, n, dt, steps * dt, case="zero", init="random", seed=args.seed,
                      record_energy=True)
        res = run(cfg)
        for k, rec in enumerate(res.energy, start=1):
            csv.append(",".join([str(cfg.n), _g(dt), str(k)]
                                + [_g(v) for v in (rec.X_prev, rec.X, rec.Y, rec.Z,
                                                   rec.residual, rec.relative_residual)]))
            monotone &= rec.X**2 <= rec.X_prev**2 + abs(rec.Z) + ENERGY_TOL * max(rec.X_prev**2, 1.0)
        worst = max(worst, dg.energy_identity_residual(res.energy))
    ok = worst <= ENERGY_TOL and monotone
    text = (f"max relative energy-identity residual: {worst:.3e} (tolerance {ENERGY_TOL:g})\n"
            f"X_(n+1)^2 <= X_n^2 + |Z_(n+1)| at every step: {'yes' if monotone else 'no'}\n"
            f"{'PASS' if ok else 'FAIL'}")
    _emit(args, csv, text)
    return 0


def mode_projections(args) -> int:
    n_list = args.n or [4, 8, 16, 32]
    t = args.T if args.T is not None else PROJECTION_T
    params = _params(args, 1.0)
    header = "n,h,h1_u,h1_eta,h1_phi"
    rows = []
    for n in n_list:
        cfg = _config(args, n, 1.0, 1.0)
        systems = build_systems(cfg)
        rows.append((n,) + projection_errors(systems, params, t))
    csv = [header] + [",".join([str(r[0]), _g(1.0 / (r[0] * args.refine))] + [_g(v) for v in r[1:]])
                      for r in rows]
    text = _text_table(header.split(","), [c.split(",") for c in csv[1:]])
    if len(rows) > 1:
        names = ("h1_u", "h1_eta", "h1_phi")
        block = _rates_block(n_list, [[r[i + 1] for r in rows] for i in range(3)], names)
        csv += block
        text += "\n\n" + _text_table(block[0].split(","), [b.split(",") for b in block[1:]])
    _emit(args, csv, text)
    return 0


def projection_errors(systems, params, t: float) -> tuple[float, float, float]:
    """H1 errors of the Stokes, elasticity and Darcy Ritz projections of the benchmark."""
    disc, case = systems.disc, systems.case
    u_R, _ = dg.ritz_project_stokes(case.exact_u, case.grad_u, case.exact_p, t, disc, params)
    eta_R = dg.ritz_project_elasticity(case.exact_eta, case.grad_eta, t, disc, params)
    phi_R = dg.ritz_project_darcy(case.exact_phi, case.grad_phi, t, disc, params)
    return (dg.h1_error(u_R, case.exact_u, case.grad_u, t, disc.V_f),
            dg.h1_error(eta_R, case.exact_eta, case.grad_eta, t, disc.V_p),
            dg.h1_error(phi_R, case.exact_phi, case.grad_phi, t, disc.Q_p))


RUNNERS = {
    "single": mode_single,
    "temporal": mode_temporal,
    "spatial": mode_spatial,
    "energy": mode_energy,
    "projections": mode_projections,
}


def _dump(args):
    n = (args.n or [8])[0] * args.refine
    buf = io.StringIO()
    for region in (Region.FLUID, Region.PORO):
        buf.write(f"# {region.value}\n")
        dump_mesh(build_rect_mesh(n, region), buf)
    with open(args.dump_mesh, "w") as fh:
        fh.write(buf.getvalue())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.refine < 1:
        parser.print_usage(sys.stderr)
        print("stokesbiot: error: --refine must be positive", file=sys.stderr)
        return 2
    try:
        if args.dump_mesh:
            _dump(args)
        return RUNNERS[args.mode](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"stokesbiot: error: {exc}", file=sys.stderr)
        return 2
    except (SingularMatrixError, np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"stokesbiot: solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
