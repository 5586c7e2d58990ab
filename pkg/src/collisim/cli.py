"""Command-line interface: ``collisim list|run|spectrum|kernel|strobo|validate|export``."""
from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import validation
from .env import correlation_spectrum, evolve
from .errors import CollisimError, ScenarioParseError
from .kernel import exact_kernel_term, kossakowski, stroboscopic_generator
from .operators import bloch_vector
from .presets import PRESETS
from .scenario_io import dump_scenario, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return "%.17g" % x


def _cfmt(z: complex) -> str:
    re, im = round(z.real, 12) + 0.0, round(z.imag, 12) + 0.0
    return f"{re:+.6g}{im:+.6g}j"


def resolve_scenario(ref: str, g_tau: float | None = None, steps: int | None = None):
    """A preset name or a scenario file, with optional overrides."""
    if ref in PRESETS:
        return PRESETS[ref].scenario(g_tau=g_tau, steps=steps)
    path = Path(ref)
    if not path.exists():
        raise UsageError(f"{ref!r} is neither a preset ({', '.join(PRESETS)}) nor a readable file")
    sc = load_scenario(path)
    if g_tau is not None:
        if sc.hamiltonian is None:
            raise UsageError("--gtau needs a scenario defined by a Hamiltonian")
        sc = sc.replace(g=g_tau / sc.tau)
    if steps is not None:
        sc = sc.replace(steps=steps)
    return sc


def trajectory_rows(sc):
    """Header and rows of the CSV trajectory."""
    traj = evolve(sc)
    if sc.d_s == 2:
        header = ["k", "t", "sx", "sy", "sz"]
        obs = [bloch_vector(r) for r in traj.states]
    else:
        idx = [(a, b) for a in range(sc.d_s) for b in range(sc.d_s)]
        header = ["k", "t"] + [f"{p}_{a}{b}" for a, b in idx for p in ("re", "im")]
        obs = [[f(r[a, b]) for a, b in idx for f in (np.real, np.imag)] for r in traj.states]
    rows = [[str(k), _fmt(t)] + [_fmt(float(v)) for v in o] for k, (t, o) in enumerate(zip(traj.times, obs))]
    return header, rows


def write_csv(header, rows, out) -> None:
    def emit(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    if out == "-":
        emit(sys.stdout)
    else:
        with open(out, "w", newline="") as handle:
            emit(handle)


def cmd_list(args) -> int:
    width = max(len(n) for n in PRESETS)
    for name, p in PRESETS.items():
        print(f"{name:<{width}}  gtau={p.g_tau:<5g} steps={p.steps:<4d} {p.description}")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = resolve_scenario(args.scenario, args.gtau, args.steps)
    write_csv(*trajectory_rows(sc), args.out)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    spec = correlation_spectrum(resolve_scenario(args.scenario).env)
    print("index,re,im,abs")
    for n, lam in enumerate(spec.eigenvalues):
        print(f"{n},{_fmt(lam.real)},{_fmt(lam.imag)},{_fmt(abs(lam))}")
    print(f"# unit eigenvalue multiplicity: {spec.unit_multiplicity}")
    length = spec.correlation_length if spec.finite_correlation_length else float("inf")
    print(f"# correlation length: {length:g}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    sc = resolve_scenario(args.scenario, args.gtau)
    term = exact_kernel_term(sc, args.k, args.m)
    print(f"# K_{{{args.k},{args.m}}} in row-major vectorization, norm {term.norm():.6g}")
    print("row,col,re,im")
    for (r, c), z in np.ndenumerate(term.matrix):
        print(f"{r},{c},{_fmt(z.real)},{_fmt(z.imag)}")
    return EXIT_OK


def _print_decomposition(label, sup, unit):
    rep = kossakowski(sup)
    print(f"[{label}]")
    for rate, jump in zip(rep.rates, rep.jumps):
        if abs(rate) < 1e-12 * max(unit, 1e-300):
            continue
        rows = "; ".join(" ".join(_cfmt(z) for z in row) for row in jump)
        print(f"  rate {rate:+.10g}  ({rate / unit:+.6f} g^2 tau)  jump [{rows}]")
    if np.max(np.abs(rep.hamiltonian)) > 1e-12 * max(unit, 1e-300):
        rows = "; ".join(" ".join(_cfmt(z) for z in row) for row in rep.hamiltonian)
        print(f"  hamiltonian [{rows}]")


def cmd_strobo(args) -> int:
    sc = resolve_scenario(args.scenario, args.gtau)
    gen = stroboscopic_generator(sc, order=args.order)
    print(f"# order {gen.order}, g^2 tau = {gen.rate:.10g}")
    print(f"# fit residual {gen.fit_residual:.3g}, resummation residual {gen.resummation_residual:.3g}")
    _print_decomposition("local", gen.local, gen.rate)
    _print_decomposition("nonlocal", gen.nonlocal_part, gen.rate)
    if gen.third_order is not None:
        _print_decomposition("third order", gen.third_order, gen.rate)
    _print_decomposition("effective", gen.effective, gen.rate)
    rep = gen.kossakowski()
    print(f"# Kossakowski matrix positive semidefinite: {rep.psd}")
    return EXIT_OK


def _run_one(name):
    return validation.run([name])


def cmd_validate(args) -> int:
    names = list(validation.SELECTORS) if args.all or not args.selectors else args.selectors
    if "all" in names:
        names = list(validation.SELECTORS)
    unknown = [n for n in names if n not in validation.SELECTORS]
    if unknown:
        raise UsageError(f"unknown selector(s) {', '.join(unknown)}; choose from {', '.join(validation.SELECTORS)}")
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            parts = list(pool.map(_run_one, names))
        groups = [g for p in parts for g in p["groups"]]
        report = {"passed": all(g["passed"] for g in groups), "groups": groups}
    else:
        report = validation.run(names)
    text = validation.report_json(report)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    for group in report["groups"]:
        for check in group["checks"]:
            mark = "PASS" if check["passed"] else ("KNOWN" if check["known_defect"] else "FAIL")
            value = "n/a" if check["value"] is None else f"{check['value']:.3g}"
            print(f"{mark} {check['name']} (value {value}, tol {check['tol']:.3g})", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_export(args) -> int:
    text = dump_scenario(resolve_scenario(args.scenario, args.gtau, args.steps))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collisim", description="Quantum collision-model simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list built-in scenarios").set_defaults(func=cmd_list)

    p = sub.add_parser("run", help="evolve a scenario and write the trajectory as CSV")
    p.add_argument("--scenario", required=True, help="preset name or scenario file")
    p.add_argument("--gtau", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", required=True, help="output CSV path, '-' for stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("spectrum", help="transfer-matrix spectrum of the environment")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("kernel", help="exact memory-kernel term K_{k,m}")
    p.add_argument("--scenario", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--gtau", type=float)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("strobo", help="stroboscopic-limit generator in GKSL form")
    p.add_argument("--scenario", required=True)
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--gtau", type=float)
    p.set_defaults(func=cmd_strobo)

    p = sub.add_parser("validate", help="compare the engine with closed forms and dense references")
    p.add_argument("selectors", nargs="*", help=f"any of: {', '.join(validation.SELECTORS)}, all")
    p.add_argument("--all", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export", help="write a scenario as YAML")
    p.add_argument("--scenario", required=True)
    p.add_argument("--gtau", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ScenarioParseError, OSError) as exc:
        print(f"collisim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CollisimError as exc:
        print(f"collisim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
