"""Command line interface.

Exit codes: 0 success, 2 input/configuration error, 3 line-search
failure, 4 budget exhausted (iterations, oracle calls, or wall time).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import bench_quadratic_rows, worstcase_report
from .energy import EnergyEvaluationError, energy_total, gradient_total
from .kernels import NUMBA_BACKEND, get_backend
from .model import ModelError
from .oracle import MolecularOracle
from .optimizers import (
    CONVERGED,
    HORIZON_COMPLETE,
    LINESEARCH_FAILURE,
    CgVariant,
    DivergenceError,
    StopCriteria,
    WiggleConfig,
    atom_wiggle,
    cg,
    fgm,
    gradient_descent_fixed,
    heavy_ball,
    lbfgs,
    make_linesearch,
    nesterov_momentum,
    nesterov_strongly_convex,
    ofgm,
    steepest_descent,
)
from .ranking import CandidateResult, RankingReport, rmsd
from .synth import make_chain_system, perturbed_copy
from .sysio import SystemFileError, load_system, save_system
from .tracefile import write_trace

METHODS = ("gd", "sd", "hb", "nag", "nag-sc", "fgm", "ofgm", "cg", "lbfgs", "wiggle")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_LINESEARCH = 3
EXIT_BUDGET = 4

_STATUS_EXIT = {
    CONVERGED: EXIT_OK,
    HORIZON_COMPLETE: EXIT_OK,
    LINESEARCH_FAILURE: EXIT_LINESEARCH,
}


class CliError(Exception):
    """Input or configuration problem; maps to exit code 2."""


def _fail(msg):
    raise CliError(msg)


def _add_method_options(p):
    p.add_argument("--method", choices=METHODS, default="lbfgs",
                   help="minimization method (default: %(default)s)")
    p.add_argument("--ls", choices=("h", "par"), default="par",
                   help="line search for sd/fgm/cg/lbfgs and ofgm without --L "
                        "(default: %(default)s)")
    p.add_argument("--h0", type=float, default=1.0,
                   help="initial line-search step (default: %(default)s)")
    p.add_argument("--ls-budget", type=int, default=6, metavar="K",
                   help="parabolic search oracle budget K (default: %(default)s)")
    p.add_argument("--no-gradient-start", action="store_true",
                   help="seed the parabolic search from two probes instead of "
                        "the directional derivative")
    p.add_argument("--m", type=int, default=3,
                   help="lbfgs memory depth (default: %(default)s)")
    p.add_argument("--cg-variant", default="prp",
                   help="cg beta formula: fr|prp|prp+|hs|cd|ls|dy "
                        "(default: %(default)s)")
    p.add_argument("--restart", type=int, default=100, metavar="K",
                   help="cg restart period (default: %(default)s)")
    p.add_argument("--L", type=float, default=None,
                   help="smoothness constant for gd/nag/nag-sc/ofgm")
    p.add_argument("--mu", type=float, default=None,
                   help="strong convexity constant for nag-sc")
    p.add_argument("--alpha", type=float, default=None, help="hb step size")
    p.add_argument("--beta", type=float, default=0.9,
                   help="hb momentum (default: %(default)s)")
    p.add_argument("--horizon", type=int, default=None, metavar="N",
                   help="ofgm horizon")
    p.add_argument("--wiggle-h", type=float, default=0.05,
                   help="wiggle probe step in angstrom (default: %(default)s)")
    p.add_argument("--wiggle-cutoff", type=float, default=7.0,
                   help="wiggle near-field radius in angstrom (default: %(default)s)")
    p.add_argument("--full-recompute", action="store_true",
                   help="wiggle probes recompute the full energy instead of "
                        "the incremental delta")
    p.add_argument("--epoch", type=int, default=100,
                   help="wiggle iterations between full-energy resyncs "
                        "(default: %(default)s)")
    p.add_argument("--max-iters", type=int, default=10_000,
                   help="iteration budget (default: %(default)s)")
    p.add_argument("--max-oracle-calls", type=int, default=None,
                   help="total oracle call budget (default: unlimited)")
    p.add_argument("--max-time", type=float, default=None,
                   help="wall-time budget in seconds (default: unlimited)")
    p.add_argument("--tol", type=float, default=0.0,
                   help="absolute gradient-norm tolerance (default: %(default)s)")
    p.add_argument("--rtol", type=float, default=1e-6,
                   help="relative gradient-norm tolerance (default: %(default)s)")
    p.add_argument("--precision", choices=("f32", "f64"), default="f64",
                   help="kernel precision (default: %(default)s)")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None,
                   help="kernel backend (default: FFMIN_BACKEND or numba "
                        "when available)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for stochastic methods, echoed into traces "
                        "(default: %(default)s)")


def _build_stop(args):
    try:
        return StopCriteria(
            max_iterations=args.max_iters,
            max_oracle_calls=args.max_oracle_calls,
            gradient_norm_tol=args.tol,
            gradient_norm_rtol=args.rtol,
            max_wall_time=args.max_time,
        )
    except ValueError as exc:
        _fail(str(exc))


def _build_linesearch(args):
    if args.ls == "h":
        return make_linesearch("h", h0=args.h0)
    return make_linesearch(
        "par", h0=args.h0, K=args.ls_budget,
        use_gradient_start=not args.no_gradient_start,
    )


def _run_method(args, system, dtype, backend):
    stop = _build_stop(args)
    if args.method == "wiggle":
        cfg = WiggleConfig(
            h=args.wiggle_h,
            seed=args.seed,
            epoch_iterations=args.epoch,
            use_incremental_coulomb=not args.full_recompute,
            cutoff=args.wiggle_cutoff,
        )
        return atom_wiggle(system, cfg, stop)
    oracle = MolecularOracle(system, dtype=dtype, backend=backend)
    x0 = system.coords.ravel()
    m = args.method
    if m == "gd":
        if args.L is None:
            _fail("gd requires --L")
        return gradient_descent_fixed(oracle, x0, args.L, stop)
    if m == "sd":
        return steepest_descent(oracle, x0, _build_linesearch(args), stop)
    if m == "hb":
        if args.alpha is None:
            _fail("hb requires --alpha")
        return heavy_ball(oracle, x0, args.alpha, args.beta, stop)
    if m == "nag":
        if args.L is None:
            _fail("nag requires --L")
        return nesterov_momentum(oracle, x0, args.L, stop)
    if m == "nag-sc":
        if args.L is None or args.mu is None:
            _fail("nag-sc requires --L and --mu")
        return nesterov_strongly_convex(oracle, x0, args.L, args.mu, stop)
    if m == "fgm":
        return fgm(oracle, x0, _build_linesearch(args), stop)
    if m == "ofgm":
        if args.horizon is None:
            _fail("ofgm requires --horizon")
        if args.L is not None:
            return ofgm(oracle, x0, args.horizon, L=args.L, stop=stop)
        return ofgm(oracle, x0, args.horizon,
                    linesearch=_build_linesearch(args), stop=stop)
    if m == "cg":
        try:
            variant = CgVariant(args.cg_variant, restart_period=args.restart)
        except ValueError as exc:
            _fail(str(exc))
        return cg(oracle, x0, variant, _build_linesearch(args), stop)
    if m == "lbfgs":
        return lbfgs(oracle, x0, m=args.m, linesearch=_build_linesearch(args),
                     stop=stop)
    _fail(f"unknown method {m!r}")


def _print_breakdown(bd, grad_max, out=None):
    out = out if out is not None else sys.stdout
    for name in ("stretch", "bend", "torsion", "coulomb", "vdw"):
        print(f"{name:<8} {getattr(bd, name):.10g}", file=out)
    print(f"{'total':<8} {bd.total:.10g}", file=out)
    print(f"{'grad_max':<8} {grad_max:.10g}", file=out)


def cmd_energy(args):
    system = load_system(args.file)
    dtype = np.float32 if args.precision == "f32" else np.float64
    backend = get_backend(args.backend)
    bd = energy_total(system, dtype, backend)
    g = gradient_total(system, dtype, backend)
    _print_breakdown(bd, float(np.max(np.abs(g))))
    return EXIT_OK


def cmd_minimize(args):
    system = load_system(args.file)
    dtype = np.float32 if args.precision == "f32" else np.float64
    backend = get_backend(args.backend)
    result = _run_method(args, system, dtype, backend)
    final = system.with_coords(result.x)
    bd = energy_total(final, dtype, backend)
    g = gradient_total(final, dtype, backend)
    print(f"method   {args.method}")
    print(f"status   {result.status}")
    print(f"iters    {result.trace.iterations}")
    _print_breakdown(bd, float(np.max(np.abs(g))))
    if args.out:
        save_system(final, args.out)
    if args.trace:
        write_trace(args.trace, result.trace, seed=args.seed,
                    precision=args.precision)
    return _STATUS_EXIT.get(result.status, EXIT_BUDGET)


def cmd_batch_rank(args):
    ref = load_system(args.ref)
    dtype = np.float32 if args.precision == "f32" else np.float64
    backend = get_backend(args.backend)
    paths = sorted(p for p in Path(args.dir).iterdir() if p.is_file())
    if not paths:
        _fail(f"no candidate files in {args.dir}")
    results = []
    for path in paths:
        cid = path.stem
        try:
            cand = load_system(path)
            if cand.natoms != ref.natoms:
                raise SystemFileError(
                    f"{path}: candidate has {cand.natoms} atoms, "
                    f"reference has {ref.natoms}"
                )
            res = _run_method(args, cand, dtype, backend)
            final = cand.with_coords(res.x)
            results.append(CandidateResult(
                id=cid,
                energy=float(res.f),
                rmsd=rmsd(final.coords, ref.coords),
                status=res.status,
            ))
        except (SystemFileError, ModelError, EnergyEvaluationError,
                DivergenceError, ValueError) as exc:
            results.append(CandidateResult(
                id=cid, energy=math.inf, rmsd=math.inf,
                status=f"error: {exc}",
            ))
    report = RankingReport.build(results)
    lines = ["rank,id,energy,rmsd,status"]
    for rank, cand in enumerate(report.candidates):
        lines.append(
            f"{rank},{cand.id},{cand.energy:.10g},{cand.rmsd:.6g},"
            f"{cand.status}"
        )
    summary = [
        f"# first_near_native: "
        f"{report.first_near_native if report.first_near_native is not None else 'none'}",
        f"# success: {'true' if report.success else 'false'}",
    ]
    text = "\n".join(summary + lines) + "\n"
    print(text, end="")
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_bench_quadratic(args):
    horizons = tuple(int(s) for s in args.horizons.split(","))
    methods = tuple(s.strip() for s in args.methods.split(","))
    rows = bench_quadratic_rows(
        n=args.n, chi=args.chi, horizons=horizons,
        seeds=range(args.seeds), methods=methods,
    )
    print("method,n,chi,N,bound,worst_ratio,pass")
    all_ok = True
    for r in rows:
        all_ok = all_ok and r["ok"]
        print(f"{r['method']},{r['n']},{r['chi']:g},{r['N']},"
              f"{r['bound']:.6g},{r['worst_ratio']:.6g},"
              f"{'pass' if r['ok'] else 'FAIL'}")
    print(f"# all bounds hold: {'true' if all_ok else 'false'}")
    return EXIT_OK


def cmd_worstcase(args):
    rep = worstcase_report(n=args.n, N=args.horizon, L=args.L, R=args.R,
                           seed=args.seed)
    for key in ("n", "N", "L", "R", "theta_N", "gap", "bound", "ratio"):
        val = rep[key]
        print(f"{key:<8} {val:.10g}" if isinstance(val, float) else f"{key:<8} {val}")
    return EXIT_OK


def cmd_bench_kernels(args):
    sizes = tuple(int(s) for s in args.sizes.split(","))
    from .energy import energy_and_gradient
    backends = []
    if NUMBA_BACKEND is not None:
        backends.append(NUMBA_BACKEND)
    backends.append(get_backend("numpy"))
    print("n," + ",".join(f"{b.name}_ms" for b in backends) +
          (",speedup" if len(backends) == 2 else ""))
    for n in sizes:
        system = make_chain_system(n, seed=1, strain=0.2)
        times = []
        for b in backends:
            energy_and_gradient(system, backend=b)  # warmup / jit compile
            best = math.inf
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                energy_and_gradient(system, backend=b)
                best = min(best, time.perf_counter() - t0)
            times.append(best * 1e3)
        row = f"{n}," + ",".join(f"{t:.3f}" for t in times)
        if len(times) == 2:
            row += f",{times[1] / times[0]:.2f}x"
        print(row)
    if NUMBA_BACKEND is None:
        print("# numba unavailable; numpy fallback only")
    return EXIT_OK


def cmd_make_demo(args):
    out = Path(args.dir)
    cand_dir = out / "candidates"
    cand_dir.mkdir(parents=True, exist_ok=True)
    ref = make_chain_system(args.atoms, seed=args.seed, strain=0.15)
    save_system(ref, out / "reference.ffs")
    rng = np.random.default_rng(args.seed)
    for i in range(args.candidates):
        # half the pool stays near the reference, half is scrambled far away
        scale = 0.3 if i % 2 == 0 else 8.0
        cand = perturbed_copy(ref, scale, seed=int(rng.integers(2**31)))
        save_system(cand, cand_dir / f"cand_{i:02d}.ffs")
    print(f"wrote reference.ffs and {args.candidates} candidates under {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ffmin",
        description="Force-field energy evaluation and minimization toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"ffmin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("energy", help="print the energy breakdown of a system file")
    p.add_argument("file")
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None)
    p.set_defaults(fn=cmd_energy)

    p = sub.add_parser("minimize", help="minimize a system and report the result")
    p.add_argument("file")
    _add_method_options(p)
    p.add_argument("--trace", default=None, metavar="CSV",
                   help="write the per-iteration trace here")
    p.add_argument("--out", default=None, metavar="FILE",
                   help="write the minimized system here")
    p.set_defaults(fn=cmd_minimize)

    p = sub.add_parser("batch-rank",
                       help="minimize every candidate in a directory and rank "
                            "by final energy")
    p.add_argument("dir")
    p.add_argument("--ref", required=True, help="reference (native) system file")
    _add_method_options(p)
    p.add_argument("--report", default=None, metavar="CSV",
                   help="also write the ranking table here")
    p.set_defaults(fn=cmd_batch_rank)

    p = sub.add_parser("bench-quadratic",
                       help="verify convergence-rate bounds on synthetic quadratics")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--chi", type=float, default=1000.0)
    p.add_argument("--horizons", default="8,16,32,64")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--methods", default="gd,cg,ofgm")
    p.set_defaults(fn=cmd_bench_quadratic)

    p = sub.add_parser("worstcase",
                       help="tightness of the fixed-horizon bound on the "
                            "piecewise worst-case function")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--horizon", type=int, default=16)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_worstcase)

    p = sub.add_parser("bench-kernels",
                       help="time the energy/gradient kernels per backend")
    p.add_argument("--sizes", default="100,300")
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(fn=cmd_bench_kernels)

    p = sub.add_parser("make-demo",
                       help="write a synthetic reference + candidate set for "
                            "batch-rank")
    p.add_argument("dir")
    p.add_argument("--candidates", type=int, default=20)
    p.add_argument("--atoms", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_make_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, SystemFileError, ModelError, EnergyEvaluationError,
            DivergenceError, OSError, ValueError) as exc:
        print(f"ffmin: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
