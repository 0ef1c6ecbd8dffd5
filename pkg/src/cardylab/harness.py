"""Experiment drivers: exact identity suite, convergence runs, annulus decay."""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cardy import Rectangle, Triangle, prediction
from .errors import TooLarge
from .hexlattice import (SQRT3, AXIAL_DIRECTIONS, HexDomain, MarkedDomain, build_domain,
                         discretize, dumps_domain, is_simply_connected, mirror_mids)
from .loops import (BAD0, BAD1, BOUNDARY_OK, CROSS0, CROSS1, DISTINCT, PAIR12, PAIR14,
                    boundary_is_face_sum, cycle_space_dimension, face_cycles_closed, face_masks,
                    gf2_rank, pattern_table)
from .observable import (admissible_triples, boundary_counts_from_pairings, boundary_subsets,
                         boundary_values_batch, ccw_vertex_mids,
                         contour_edges, contour_numerators, elementary_contours,
                         field_counts, observable_exact, path_trees, random_contours,
                         residual_numerators)
from .percolation import annulus_crossing_mc, crossing_probability_mc
from .rng import derive_seed

# -- corpus -------------------------------------------------------------------------

def _rotate(q: int, r: int) -> tuple[int, int]:
    return -r, q + r


def _normalize(cells) -> tuple[tuple[int, int], ...]:
    mq = min(q for q, _ in cells)
    mr = min(r for _, r in cells)
    return tuple(sorted((q - mq, r - mr) for q, r in cells))


def canonical_polyhex(cells) -> tuple[tuple[int, int], ...]:
    """Smallest normalized image under the 12 lattice symmetries."""
    best = None
    for reflect in (False, True):
        cur = [(r, q) for q, r in cells] if reflect else list(cells)
        for _ in range(6):
            cur = [_rotate(q, r) for q, r in cur]
            key = _normalize(cur)
            if best is None or key < best:
                best = key
    return best


def free_polyhexes(n_max: int) -> list[list[tuple[tuple[int, int], ...]]]:
    """Free polyhexes by size, grown one cell at a time and deduplicated by canonical form."""
    levels = [[((0, 0),)]]
    while len(levels) < n_max:
        nxt = set()
        for shape in levels[-1]:
            cells = set(shape)
            for q, r in shape:
                for dq, dr in AXIAL_DIRECTIONS:
                    c = (q + dq, r + dr)
                    if c not in cells:
                        nxt.add(canonical_polyhex(cells | {c}))
        levels.append(sorted(nxt))
    return levels[:n_max]


def domain_corpus(max_faces: int) -> list[HexDomain]:
    """All simply connected face sets with at most ``max_faces`` faces, up to symmetry."""
    out = []
    for level in free_polyhexes(max_faces):
        for shape in level:
            if is_simply_connected(shape):
                out.append(build_domain(shape))
    return out


def random_domain(n_faces: int, seed: int) -> HexDomain:
    """A simply connected domain of ``n_faces`` faces grown at random from one cell."""
    rng = np.random.default_rng(seed)
    while True:
        cells = [(0, 0)]
        seen = {(0, 0)}
        while len(cells) < n_faces:
            q, r = cells[rng.integers(len(cells))]
            dq, dr = AXIAL_DIRECTIONS[rng.integers(6)]
            c = (q + dq, r + dr)
            if c not in seen:
                seen.add(c)
                cells.append(c)
        if is_simply_connected(seen):
            return build_domain(canonical_polyhex(seen))


# -- exact suite -------------------------------------------------------------------

@dataclass
class CheckResult:
    checked: int = 0
    failures: int = 0
    seconds: float = 0.0
    first_failure: str = ""

    def fail(self, what: str, n: int = 1) -> None:
        if n and not self.failures:
            self.first_failure = what
        self.failures += n

    @property
    def ok(self) -> bool:
        return self.failures == 0


CHECKS = ("counting", "bijection", "link_patterns", "holomorphicity", "holomorphicity_deg3",
          "contours", "boundary_values", "hexagon_field")


@dataclass
class ExactSuiteReport:
    max_faces: int
    n_domains: int
    checks: dict[str, CheckResult]
    seconds: float

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "max_faces": self.max_faces,
            "n_domains": self.n_domains,
            "ok": self.ok,
            "seconds": round(self.seconds, 3),
            "checks": {k: {**asdict(v), "ok": v.ok, "seconds": round(v.seconds, 3)}
                       for k, v in self.checks.items()},
        }


def _sanity(check: CheckResult, counts: np.ndarray, F: int, tag: str) -> None:
    """Every computed row must be a valid trace histogram summing to 2^F."""
    if (counts == -2).any():
        check.fail(tag + ": trace failure")
    valid = counts[..., 0] >= 0
    if (counts.sum(axis=2)[valid] != 1 << F).any():
        check.fail(tag + ": H does not sum to one")


def run_exact_suite(max_faces: int = 6, fault: bool = False, seed: int = 0,
                    random_contour_count: int = 8) -> ExactSuiteReport:
    """Exhaustive identity checks over the symmetry-reduced corpus.

    ``fault`` flips half-edge 0 in every configuration produced by the
    coloring bijection; the suite must then fail.
    """
    if max_faces > 24:
        raise TooLarge("the exact suite is capped at 24 faces")
    t_all = time.perf_counter()
    checks = {k: CheckResult() for k in CHECKS}
    corpus = domain_corpus(max_faces)

    def timed(name):
        class _T:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                checks[name].seconds += time.perf_counter() - self.t
        return _T()

    for di, d in enumerate(corpus):
        F = d.n_faces
        tag = f"domain {di} ({F} faces)"
        with timed("counting"):
            checks["counting"].checked += 1
            if (cycle_space_dimension(d) != F or gf2_rank(face_masks(d)) != F
                    or not face_cycles_closed(d) or not boundary_is_face_sum(d)):
                checks["counting"].fail(tag)
        subsets = boundary_subsets(d)
        table = None
        if len(subsets):
            with timed("bijection"):
                table = pattern_table(d, subsets, fault_he=0 if fault else -1)
                bad = int(((table[:, BOUNDARY_OK] != 1) | (table[:, DISTINCT] != 1 << F)).sum())
                # each subset carries two labelings
                checks["bijection"].checked += 2 * len(subsets)
                checks["bijection"].fail(tag, 2 * bad)
            with timed("link_patterns"):
                for bad_col, cross_col, pat_col in ((BAD0, CROSS0, PAIR14), (BAD1, CROSS1, PAIR12)):
                    bad = int(((table[:, bad_col] != 0) | (table[:, cross_col] != table[:, pat_col])).sum())
                    checks["link_patterns"].checked += len(subsets)
                    checks["link_patterns"].fail(tag, bad)
        triples = admissible_triples(d)
        if not triples:
            continue
        trees, row = path_trees(d, d.boundary_mids)
        interior_mids = np.flatnonzero(d.mid_boundary_pos < 0)
        with timed("holomorphicity"):
            # the three mid-edges at an interior vertex are all interior
            counts = field_counts(d, triples, trees, row, interior_mids)
            _sanity(checks["holomorphicity"], counts, F, tag)
            if len(d.interior_vertices):
                vm = ccw_vertex_mids(d, d.interior_vertices)
                res = residual_numerators(counts, vm)
                live = ~(counts[:, vm, 0] == -1).any(axis=-1)
                checks["holomorphicity"].checked += int(live.sum())
                checks["holomorphicity"].fail(tag, int((res != 0).any(axis=-1).sum()))
        with timed("contours"):
            contours = elementary_contours(d)
            contours += random_contours(d, random_contour_count, derive_seed(seed, di))
            for con in contours:
                for c in (con, con[::-1]):
                    mids, steps = contour_edges(d, c)
                    vals, valid = contour_numerators(counts, mids, steps)
                    checks["contours"].checked += int(valid.sum())
                    checks["contours"].fail(tag, int(((vals != 0).any(axis=1) & valid).sum()))
        with timed("boundary_values"):
            if table is not None:
                counts = boundary_counts_from_pairings(d, triples, table[:, PAIR12:PAIR14 + 1], counts)
                _sanity(checks["boundary_values"], counts, F, tag)
                cross = table[:, [CROSS0, CROSS1]]
            else:
                cross = None
            rep = boundary_values_batch(d, triples, counts, cross)
            checks["boundary_values"].checked += rep.checked
            checks["boundary_values"].fail(tag, len(rep.failures))
        with timed("holomorphicity_deg3"):
            vm = ccw_vertex_mids(d)
            if len(vm):
                res = residual_numerators(counts, vm)
                live = ~(counts[:, vm, 0] == -1).any(axis=-1)
                checks["holomorphicity_deg3"].checked += int(live.sum())
                checks["holomorphicity_deg3"].fail(tag, int((res != 0).any(axis=-1).sum()))
    if max_faces >= 1:
        with timed("hexagon_field"):
            d = build_domain([(0, 0)])
            fld = observable_exact(MarkedDomain(d, (1, 3, 5)))
            checks["hexagon_field"].checked += 1
            if fld.H(0) != (0.5, 0, 0.5):
                checks["hexagon_field"].fail("single hexagon field")
    # the flagship check owns the time spent building the fields
    return ExactSuiteReport(max_faces, len(corpus), checks, time.perf_counter() - t_all)


# -- shapes ---------------------------------------------------------------------------

def triangle_geometry(t: float, mesh: float):
    """Equilateral triangle of side 1, marks A, B, C at the corners and D on CA.

    The side CA is vertical at x = 0.75 sqrt(3) mesh and B lies on the x-axis,
    so the reflection y -> -y (a lattice symmetry) maps the shape to itself.
    The small offset keeps lattice points off the side CA.
    """
    x = 0.75 * SQRT3 * mesh
    h = 0.5
    A = (x, h)
    B = (x - SQRT3 * h, 0.0)
    C = (x, -h)
    D = (x, -h + 2 * h * t)
    return [A, B, C], [A, B, C, D]


def rectangle_geometry(aspect: float, mesh: float):
    """Rectangle with |AB| = 1 and |BC| = aspect, turned by 45 degrees.

    A is the rightmost corner and the center sits on the x-axis, so for
    aspect 1 the reflection y -> -y swaps B and D and fixes A and C.
    """
    s = 1 / math.sqrt(2)
    ab = (-s, s)
    bc = (-s * aspect, -s * aspect)
    cx = 0.75 * SQRT3 * mesh
    A = (cx - (ab[0] + bc[0]) / 2, -(ab[1] + bc[1]) / 2)
    B = (A[0] + ab[0], A[1] + ab[1])
    C = (B[0] + bc[0], B[1] + bc[1])
    D = (A[0] + bc[0], A[1] + bc[1])
    return [A, B, C, D], [A, B, C, D]


def shape_geometry(shape, mesh: float):
    if isinstance(shape, Triangle):
        return triangle_geometry(shape.t, mesh)
    if isinstance(shape, Rectangle):
        return rectangle_geometry(shape.aspect, mesh)
    return shape["polygon"], shape["prime_ends"]


def mirror_swaps_arcs(md: MarkedDomain) -> bool:
    """Does y -> -y map the marked domain to itself with A <-> C or B <-> D fixed pairs swapped?

    Either form exchanges the arc pair (AB, CD) with (BC, DA), which forces a
    crossing probability of exactly 1/2.
    """
    mm = mirror_mids(md.domain)
    if (mm < 0).any():
        return False
    A, B, C, D = md.marks
    return bool((mm[A] == C and mm[C] == A and mm[B] == B and mm[D] == D) or
                (mm[B] == D and mm[D] == B and mm[A] == A and mm[C] == C))


def mesh_for_side_hexagons(n: float) -> float:
    """Mesh at which a unit length spans ``n`` hexagon widths."""
    return 1.0 / (n * SQRT3)


# -- convergence ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    shape: object
    mesh_list: tuple[float, ...]
    trials: int
    seed: int
    output: str | None = None
    workers: int | None = None

    def __post_init__(self):
        ml = tuple(float(m) for m in self.mesh_list)
        object.__setattr__(self, "mesh_list", ml)
        if not ml or any(b >= a for a, b in zip(ml, ml[1:])) or min(ml) <= 0:
            raise ValueError("mesh_list must be positive and strictly decreasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def describe(self) -> dict:
        if isinstance(self.shape, Triangle):
            shape = {"kind": "triangle", "t": self.shape.t}
        elif isinstance(self.shape, Rectangle):
            shape = {"kind": "rectangle", "aspect": self.shape.aspect}
        else:
            shape = {"kind": "polygon", **self.shape}
        # workers and output location do not affect results
        return {"shape": shape, "mesh_list": list(self.mesh_list), "trials": self.trials,
                "seed": self.seed}

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.describe(), sort_keys=True).encode()).hexdigest()


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an ``[experiment]`` key = value file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path) as fh:
        cp.read_file(fh)
    sec = cp["experiment"]
    kind = sec.get("shape", "triangle").strip()
    if kind == "triangle":
        shape = Triangle(sec.getfloat("t", 0.5))
    elif kind == "rectangle":
        shape = Rectangle(sec.getfloat("aspect", 1.0))
    elif kind == "polygon":
        raw = json.loads((Path(path).parent / sec["polygon"]).read_text())
        shape = {"polygon": [tuple(p) for p in raw["polygon"]],
                 "prime_ends": [tuple(p) for p in raw["prime_ends"]],
                 "prediction": raw.get("prediction")}
    else:
        raise ValueError(f"unknown shape {kind!r}")
    if "mesh_list" in sec:
        meshes = [float(x) for x in sec["mesh_list"].split(",")]
    else:
        meshes = [mesh_for_side_hexagons(float(x)) for x in sec["side_hexagons"].split(",")]
    workers = sec.getint("workers") if "workers" in sec else None
    return ExperimentConfig(shape, tuple(meshes), sec.getint("trials"), sec.getint("seed"),
                            sec.get("output"), workers)


@dataclass
class ConvergenceRow:
    delta: float
    n_faces: int
    samples: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    prediction: float
    abs_error: float
    wall_time_s: float = 0.0


CSV_FIELDS = ("delta", "n_faces", "samples", "successes", "p_hat", "ci_low", "ci_high",
              "prediction", "abs_error")


def blob_hash(text: str) -> str:
    data = text.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class ConvergenceResult:
    config: ExperimentConfig
    rows: list[ConvergenceRow]
    domain_hashes: list[str]
    symmetric: list[bool]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([repr(r.delta), r.n_faces, r.samples, r.successes, repr(r.p_hat),
                        repr(r.ci_low), repr(r.ci_high), repr(r.prediction), repr(r.abs_error)])
        return buf.getvalue()

    def metadata(self) -> dict:
        errs = [r.abs_error for r in self.rows]
        return {
            "config": self.config.describe(),
            "config_hash": self.config.config_hash(),
            "seed": self.config.seed,
            "row_seeds": [derive_seed(self.config.seed, i) for i in range(len(self.rows))],
            "domain_hashes": self.domain_hashes,
            "mirror_symmetric": self.symmetric,
            "wall_time_s": [r.wall_time_s for r in self.rows],
            "abs_error_nonincreasing": all(b <= a for a, b in zip(errs, errs[1:])),
            "marks": "A, B, C, D counterclockwise; event: blue path between arcs AB and CD",
            "tolerance_note": "finite-mesh tolerances are regression constants; no convergence rate is known",
        }

    def write(self, path: str | Path) -> tuple[Path, Path]:
        p = Path(path)
        p.write_text(self.csv_text())
        side = p.with_suffix(p.suffix + ".json")
        side.write_text(json.dumps(self.metadata(), sort_keys=True, indent=2) + "\n")
        return p, side


def run_convergence(cfg: ExperimentConfig) -> ConvergenceResult:
    rows, hashes, sym = [], [], []
    if isinstance(cfg.shape, (Triangle, Rectangle)):
        pred = prediction(cfg.shape)
    else:
        pred = cfg.shape.get("prediction")
        pred = float("nan") if pred is None else float(pred)
    for i, mesh in enumerate(cfg.mesh_list):
        poly, ends = shape_geometry(cfg.shape, mesh)
        md = discretize(poly, ends, mesh)
        est = crossing_probability_mc(md, cfg.trials, derive_seed(cfg.seed, i), cfg.workers)
        rows.append(ConvergenceRow(mesh, md.domain.n_faces, est.trials, est.successes, est.p_hat,
                                   est.ci_low, est.ci_high, pred, abs(est.p_hat - pred),
                                   est.wall_time_s))
        hashes.append(blob_hash(dumps_domain(md)))
        sym.append(mirror_swaps_arcs(md))
    res = ConvergenceResult(cfg, rows, hashes, sym)
    if cfg.output:
        res.write(cfg.output)
    return res


# -- annulus decay -----------------------------------------------------------------

@dataclass
class RswRow:
    R: float
    ratio: float
    samples: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float


@dataclass
class RswResult:
    r: float
    mesh: float
    rows: list[RswRow]
    eta_hat: float
    r_squared: float

    @property
    def advisory_in_range(self) -> bool:
        return 0.07 <= self.eta_hat <= 0.14

    @property
    def monotone(self) -> bool:
        """p_hat nonincreasing in R up to overlapping confidence intervals."""
        return all(b.ci_low <= a.ci_high for a, b in zip(self.rows, self.rows[1:]))

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("R", "R_over_r", "samples", "successes", "p_hat", "ci_low", "ci_high"))
        for x in self.rows:
            w.writerow([repr(x.R), repr(x.ratio), x.samples, x.successes, repr(x.p_hat),
                        repr(x.ci_low), repr(x.ci_high)])
        return buf.getvalue()


def fit_power_law(ratios: Sequence[float], p: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log p against log(r / R) and the fit's R^2."""
    x = -np.log(np.asarray(ratios, dtype=float))
    y = np.log(np.asarray(p, dtype=float))
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def run_rsw(r: float, R_list: Sequence[float], mesh: float, trials: int, seed: int,
            workers: int | None = None) -> RswResult:
    if not mesh < r < min(R_list):
        raise ValueError("need mesh < r < min(R_list)")
    rows = []
    for i, R in enumerate(sorted(R_list)):
        est = annulus_crossing_mc(r, R, mesh, trials, derive_seed(seed, i), workers)
        rows.append(RswRow(R, R / r, est.trials, est.successes, est.p_hat, est.ci_low, est.ci_high))
    if any(x.successes == 0 for x in rows):
        eta, r2 = float("nan"), float("nan")
    else:
        eta, r2 = fit_power_law([x.ratio for x in rows], [x.p_hat for x in rows])
    return RswResult(r, mesh, rows, eta, r2)
