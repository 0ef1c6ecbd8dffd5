"""Command line entry point: ``cardylab <command> ...``.

Every command exits 0 iff all checks it asserts pass; usage errors exit 2.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import cardy, harness
from .errors import CardyLabError
from .hexlattice import MarkedDomain, build_domain, load_domain, save_domain
from .loops import (chi_square_uniform, crossing_equivalence_check, enumerate_loop_configs,
                    sample_loop_config)
from .observable import (ObservableField, boundary_values_check, holomorphicity_residual,
                         observable_exact, observable_mc)
from .percolation import crossing_probability_mc
from .rng import RngState
from .spinor import build_cover, count_spinor_configs, spinor_to_loops, SpinorColoring


def _ids(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


def _emit(payload: dict, out: str | None = None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _marked(args, k: int | None = None) -> MarkedDomain:
    d, stored = load_domain(args.domain)
    marks = _ids(getattr(args, "marks", None)) or stored
    md = MarkedDomain(d, marks)
    if k is not None and md.k != k:
        raise CardyLabError(f"expected {k} marks, got {md.k}")
    return md


# -- commands ---------------------------------------------------------------------

def cmd_domain(args) -> int:
    faces = [tuple(f) for f in json.loads(args.faces)]
    d = build_domain(faces, args.mesh)
    md = MarkedDomain(d, _ids(args.marks))
    save_domain(md, args.out)
    _emit({"faces": d.n_faces, "vertices": d.n_vertices, "mid_edges": d.n_mids,
           "boundary_mids": [int(m) for m in d.boundary_mids]})
    return 0


def cmd_sample(args) -> int:
    md = _marked(args, 4)
    est = crossing_probability_mc(md, args.trials, args.seed, args.workers)
    _emit(est.to_dict(), args.out)
    return 0


def cmd_enumerate(args) -> int:
    md = _marked(args)
    d = md.domain
    if args.check == "crossing":
        rep = crossing_equivalence_check(md)
        _emit({"check": "crossing", "colorings": rep.n_colorings,
               "crossing_count": rep.crossing_count, "pattern_count": rep.pattern_count,
               "mismatches": rep.mismatches, "distinct_configs": rep.distinct_configs,
               "ok": rep.ok})
        return 0 if rep.ok else 1
    if args.check == "count":
        seen = set()
        ok = True
        for xi in enumerate_loop_configs(md):
            ok &= xi.has_boundary(md.marks)
            seen.add(xi.bits)
        ok &= len(seen) == 1 << d.n_faces
        _emit({"check": "count", "configs": len(seen), "expected": 1 << d.n_faces, "ok": ok})
        return 0 if ok else 1
    # uniformity: chi-square of sampled configurations against the enumerated set
    index = {xi.bits: i for i, xi in enumerate(enumerate_loop_configs(md))}
    hist = np.zeros(len(index), dtype=np.int64)
    for s in range(args.trials):
        hist[index[sample_loop_config(md, RngState(args.seed, s)).bits]] += 1
    stat, crit = chi_square_uniform(hist)
    ok = stat <= crit
    _emit({"check": "uniformity", "samples": args.trials, "cells": len(hist),
           "chi2": stat, "critical_99": crit, "ok": bool(ok)})
    return 0 if ok else 1


def cmd_spinor(args) -> int:
    d, _ = load_domain(args.domain)
    cover = build_cover(d, _ids(args.branch))
    n = count_spinor_configs(cover)
    payload = {"branch_points": list(cover.branch_points), "absorbed": list(cover.absorbed),
               "configs": n, "expected": 1 << d.n_faces}
    ok = n == 1 << d.n_faces
    if args.check == "equivalence":
        # boundary branch points only: compare with the coloring bijection
        from .loops import coloring_to_loops
        from .percolation import Coloring

        md = MarkedDomain(d, cover.branch_points)
        spin = {spinor_to_loops(cover, SpinorColoring.from_index(i, d.n_faces + 1)).bits
                for i in range(1 << (d.n_faces + 1))}
        col = {coloring_to_loops(md, Coloring.from_index(i, d.n_faces)).bits
               for i in range(1 << d.n_faces)}
        payload["same_set"] = spin == col
        ok &= spin == col
    payload["ok"] = ok
    _emit(payload)
    return 0 if ok else 1


def cmd_observe(args) -> int:
    md = _marked(args, 3)
    if args.backend == "exact":
        fld = observable_exact(md)
    else:
        d = md.domain
        zs = [z for z in range(d.n_mids) if z not in md.marks]
        fld = observable_mc(md, zs, args.trials, args.seed, args.workers)
    text = fld.dumps()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_holo_check(args) -> int:
    fld = ObservableField.from_dict(json.loads(Path(args.field).read_text()))
    d = fld.domain.domain
    bad, checked = [], 0
    for v in d.interior_vertices:
        try:
            r = holomorphicity_residual(fld, int(v))
        except CardyLabError:
            continue
        checked += 1
        if fld.exact and not r.is_zero():
            bad.append(int(v))
    # Monte Carlo fields carry sampling noise; only exact residuals must vanish
    payload = {"checked": checked, "nonzero": bad, "exact": fld.exact}
    if fld.exact:
        rep = boundary_values_check(fld)
        payload["boundary_checked"] = rep.checked
        payload["boundary_failures"] = len(rep.failures)
        bad += [-1] * len(rep.failures)
    payload["ok"] = not bad
    _emit(payload)
    return 0 if not bad else 1


def cmd_predict(args) -> int:
    if args.shape == "triangle":
        p = cardy.triangle_prediction(args.t)
    else:
        p = cardy.rectangle_prediction(args.aspect)
    print(f"{p:.12f}")
    return 0


def cmd_converge(args) -> int:
    cfg = harness.load_config(args.config)
    if args.out:
        cfg = harness.ExperimentConfig(cfg.shape, cfg.mesh_list, cfg.trials, cfg.seed,
                                       args.out, cfg.workers)
    res = harness.run_convergence(cfg)
    sys.stdout.write(res.csv_text())
    tol = args.tolerance
    if tol is None:
        return 0
    return 0 if res.rows[-1].abs_error <= tol else 1


def cmd_rsw(args) -> int:
    res = harness.run_rsw(args.r, [float(x) for x in args.Rs.split(",")], args.mesh,
                          args.trials, args.seed, args.workers)
    text = res.csv_text()
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    print(f"# eta_hat={res.eta_hat:.6f} r_squared={res.r_squared:.6f} "
          f"monotone={res.monotone} advisory_in_range={res.advisory_in_range}")
    ok = res.monotone and res.eta_hat > 0 and res.r_squared >= args.min_r2
    return 0 if ok else 1


def cmd_exact_suite(args) -> int:
    t = time.perf_counter()
    rep = harness.run_exact_suite(args.max_faces, fault=args.inject_fault)
    payload = rep.to_dict()
    payload["wall_time_s"] = time.perf_counter() - t
    _emit(payload)
    return 0 if rep.ok else 1


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cardylab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("domain", help="write a domain file from a face list")
    s.add_argument("--faces", required=True, help='JSON list such as "[[0,0],[1,0]]"')
    s.add_argument("--mesh", type=float, default=1.0)
    s.add_argument("--marks", default="")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_domain)

    s = sub.add_parser("sample", help="Monte Carlo crossing probability")
    s.add_argument("--domain", required=True)
    s.add_argument("--marks")
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("enumerate", help="exact loop-configuration checks")
    s.add_argument("--domain", required=True)
    s.add_argument("--marks")
    s.add_argument("--check", choices=("crossing", "count", "uniformity"), default="crossing")
    s.add_argument("--trials", type=int, default=100_000, help="samples for --check uniformity")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("spinor", help="spinor coloring checks")
    s.add_argument("--domain", required=True)
    s.add_argument("--branch", default="")
    s.add_argument("--check", choices=("count", "equivalence"), default="count")
    s.set_defaults(func=cmd_spinor)

    s = sub.add_parser("observe", help="compute the observable field")
    s.add_argument("--domain", required=True)
    s.add_argument("--marks")
    s.add_argument("--backend", choices=("exact", "mc"), default="exact")
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_observe)

    s = sub.add_parser("holo-check", help="check a stored field for holomorphicity")
    s.add_argument("--field", required=True)
    s.set_defaults(func=cmd_holo_check)

    s = sub.add_parser("predict", help="continuum crossing probability")
    s.add_argument("--shape", choices=("triangle", "rectangle"), required=True)
    s.add_argument("--t", type=float, default=0.5)
    s.add_argument("--aspect", type=float, default=1.0)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("converge", help="convergence table from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="CSV path (overrides the config)")
    s.add_argument("--tolerance", type=float, help="fail if the final abs_error exceeds this")
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("rsw", help="annulus crossing decay")
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--Rs", required=True)
    s.add_argument("--mesh", type=float, required=True)
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int)
    s.add_argument("--min-r2", type=float, default=0.98)
    s.add_argument("--out")
    s.set_defaults(func=cmd_rsw)

    s = sub.add_parser("exact-suite", help="exhaustive identity checks")
    s.add_argument("--max-faces", type=int, default=6)
    s.add_argument("--inject-fault", action="store_true")
    s.set_defaults(func=cmd_exact_suite)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CardyLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
