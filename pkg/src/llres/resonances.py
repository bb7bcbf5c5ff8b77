"""Zero location in the sheet coordinate by the argument principle.

The scanner works on the log of the determinant function: winding numbers
come from accumulated phase increments along rectangle boundaries, refined
until every increment is safely below pi/2, and candidate boxes shrink
through a quadtree until a Newton polish (on the logarithmic derivative)
takes over.  Multiplicities are re-verified on a micro-contour around each
converged zero.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Callable

import numpy as np

from .model import ValidationFailure, sector_membership


class UnresolvedBoxError(RuntimeError):
    """A boundary kept looking like it passes through a zero after jitters."""

    def __init__(self, message, box=None):
        super().__init__(message)
        self.box = box


@dataclasses.dataclass(frozen=True)
class Box:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def __post_init__(self):
        if not (self.re_lo < self.re_hi and self.im_lo < self.im_hi):
            raise ValidationFailure("degenerate box")

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_lo + self.re_hi), 0.5 * (self.im_lo + self.im_hi))

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.re_hi - self.re_lo, self.im_hi - self.im_lo))

    def contains(self, k: complex, pad: float = 0.0) -> bool:
        return (self.re_lo - pad <= k.real <= self.re_hi + pad
                and self.im_lo - pad <= k.imag <= self.im_hi + pad)

    def corners(self) -> list[complex]:
        return [complex(self.re_lo, self.im_lo), complex(self.re_hi, self.im_lo),
                complex(self.re_hi, self.im_hi), complex(self.re_lo, self.im_hi)]

    def split4(self, fx: float = 0.5, fy: float = 0.5) -> list["Box"]:
        xm = self.re_lo + fx * (self.re_hi - self.re_lo)
        ym = self.im_lo + fy * (self.im_hi - self.im_lo)
        return [Box(self.re_lo, xm, self.im_lo, ym), Box(xm, self.re_hi, self.im_lo, ym),
                Box(self.re_lo, xm, ym, self.im_hi), Box(xm, self.re_hi, ym, self.im_hi)]

    def key(self) -> tuple[float, float, float, float]:
        return (self.re_lo, self.re_hi, self.im_lo, self.im_hi)


@dataclasses.dataclass(frozen=True)
class Resonance:
    k: complex
    z: complex
    multiplicity: int
    residual: float
    box: Box


@dataclasses.dataclass
class ScanReport:
    scanned_region: Box
    resonances: list[Resonance]
    windings: list[tuple[Box, int]]
    unresolved: list[Box]
    boxes_examined: int
    hole_half: float = 0.0  # half-width of an unscanned square around the origin

    def total_multiplicity(self) -> int:
        return sum(r.multiplicity for r in self.resonances)

    def to_json(self) -> str:
        def box_dict(b: Box):
            return {"re_lo": b.re_lo, "re_hi": b.re_hi, "im_lo": b.im_lo, "im_hi": b.im_hi}

        payload = {
            "scanned_region": box_dict(self.scanned_region),
            "boxes_examined": self.boxes_examined,
            "resonances": [
                {"re_k": r.k.real, "im_k": r.k.imag, "re_z": r.z.real,
                 "im_z": r.z.imag, "multiplicity": r.multiplicity,
                 "residual": r.residual, "box": box_dict(r.box)}
                for r in self.resonances
            ],
            "windings": [[box_dict(b), w] for b, w in self.windings],
            "unresolved": [box_dict(b) for b in self.unresolved],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclasses.dataclass(frozen=True)
class ScanConfig:
    refine_threshold: float = 2e-3
    newton_tol: float = 1e-12
    newton_max_iter: int = 60
    residual_ratio_tol: float = 1e-8
    boundary_points: int = 8
    max_boundary_points: int = 20000
    max_depth: int = 40
    jitter_retries: int = 3
    jitter_scale: float = 0.07
    seed: int = 0
    micro_radius_factor: float = 8.0
    workers: int = 1


# ---------------------------------------------------------------------------
# winding numbers from log values
# ---------------------------------------------------------------------------


def _wrap(phase: np.ndarray | float):
    return (np.asarray(phase) + np.pi) % (2.0 * np.pi) - np.pi


def _winding_from_log(flog: Callable[[complex], complex], box: Box,
                      n_per_edge: int, max_points: int) -> int:
    """Accumulated-argument winding along the box boundary.

    ``flog`` returns a complex logarithm of the target function; only phase
    differences are used, so any fixed normalization cancels.  Every segment
    is validated through its midpoint: the two half-increments must be small
    and consistent with the whole, which defeats the 2*pi aliasing a naive
    wrapped difference is blind to.
    """
    corners = box.corners()
    pts: list[complex] = []
    for c0, c1 in zip(corners, corners[1:] + corners[:1]):
        pts.extend(c0 + (c1 - c0) * j / n_per_edge for j in range(n_per_edge))

    state = {"evals": 0}

    def ev(p: complex) -> complex:
        if state["evals"] >= max_points:
            raise UnresolvedBoxError("boundary sampling budget exhausted", box=box)
        state["evals"] += 1
        v = flog(p)
        if not (np.isfinite(v.real) and np.isfinite(v.imag)):
            raise UnresolvedBoxError("function vanished on the contour", box=box)
        return v

    vals = [ev(p) for p in pts]
    total = 0.0

    def segment(a: complex, va: complex, b: complex, vb: complex, depth: int) -> None:
        nonlocal total
        if depth > 52:
            raise UnresolvedBoxError(
                "argument increment would not settle; zero on or near contour", box=box)
        inc = _wrap(vb.imag - va.imag)
        m = 0.5 * (a + b)
        vm = ev(m)
        i1 = _wrap(vm.imag - va.imag)
        i2 = _wrap(vb.imag - vm.imag)
        if (abs(i1) < 0.5 * np.pi and abs(i2) < 0.5 * np.pi
                and abs(i1 + i2 - inc) < 1e-9):
            total += i1 + i2
            return
        segment(a, va, m, vm, depth + 1)
        segment(m, vm, b, vb, depth + 1)

    n = len(pts)
    for i in range(n):
        segment(pts[i], vals[i], pts[(i + 1) % n], vals[(i + 1) % n], 0)

    w = total / (2.0 * np.pi)
    if abs(w - round(w)) > 0.1:
        raise UnresolvedBoxError(f"winding {w:.3f} is not close to an integer", box=box)
    return int(round(w))


def winding_number(f: Callable[[complex], complex], box: Box,
                   n_points: int = 16, max_points: int = 20000,
                   rng: np.random.Generator | None = None,
                   jitter_retries: int = 3, jitter_scale: float = 0.07) -> int:
    """Winding of a callable around a rectangle, with jittered retries.

    ``f`` returns values of the function itself; zeros close to the contour
    surface as non-integer or non-settling windings, in which case the box is
    inflated by a small random amount and retried before giving up.
    """
    rng = rng or np.random.default_rng(0)

    def flog(p: complex) -> complex:
        v = complex(f(p))
        if v == 0:
            raise UnresolvedBoxError("function vanished exactly on the contour", box=box)
        return complex(np.log(abs(v)), np.angle(v))

    trial = box
    for attempt in range(jitter_retries + 1):
        try:
            return _winding_from_log(flog, trial, n_points, max_points)
        except UnresolvedBoxError:
            if attempt == jitter_retries:
                raise
            pad = jitter_scale * trial.diameter * (0.5 + rng.random())
            trial = Box(trial.re_lo - pad, trial.re_hi + pad,
                        trial.im_lo - pad, trial.im_hi + pad)
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# quadtree scan
# ---------------------------------------------------------------------------


class _LogCache:
    """Log of the deflated determinant.

    The determinant carries an essential factor exp(-i*tr(JB)/k) from the
    regularization of the singular part; multiplying it away leaves the same
    zeros and windings but a phase the boundary sampler can follow without
    absurd refinement near the origin.
    """

    def __init__(self, family):
        self.family = family
        self.deflate = complex(getattr(family, "signed_trace", 0.0))
        self.cache: dict[complex, complex] = {}
        self.evals = 0

    def __call__(self, k: complex) -> complex:
        k = complex(k)
        v = self.cache.get(k)
        if v is None:
            v = complex(self.family.logdet2(k)) + 1j * self.deflate / k
            self.cache[k] = v
            self.evals += 1
        return v


def _newton_refine(family, k0: complex, cfg: ScanConfig):
    k = complex(k0)
    step = np.inf
    for _ in range(cfg.newton_max_iter):
        try:
            d = family.dlogdet2_dk(k)
        except np.linalg.LinAlgError:
            return k  # landed exactly on the zero
        if not np.isfinite(d.real) or not np.isfinite(d.imag):
            return k
        if d == 0:
            return None
        delta = 1.0 / d
        k_new = k - delta
        step = abs(delta)
        if not np.isfinite(k_new.real) or not np.isfinite(k_new.imag):
            return None
        k = k_new
        if step < cfg.newton_tol * max(abs(k), 1e-6):
            return k
    return None


def _bisect_to_zero(family, flog, box: Box, winding: int, cfg: ScanConfig,
                    rng) -> complex:
    """Winding-guided bisection fallback for Newton failures."""
    current = box
    for _ in range(60):
        if current.diameter < 1e-10:
            return current.center
        for fx, fy in ((0.5, 0.5), (0.43, 0.57), (0.57, 0.43)):
            children = current.split4(fx, fy)
            try:
                ws = [_winding_from_log(flog, c, cfg.boundary_points,
                                        cfg.max_boundary_points)
                      for c in children]
            except UnresolvedBoxError:
                continue
            if sum(ws) == winding and any(ws):
                current = children[int(np.argmax(ws))]
                winding = max(ws)
                break
        else:
            raise UnresolvedBoxError("bisection could not separate the zero", box=current)
    return current.center


def scan_resonances(family, region: Box, config: ScanConfig | None = None) -> ScanReport:
    """Adaptive quadtree scan for determinant zeros inside a k-rectangle.

    Boxes with positive winding are subdivided (with jittered split points
    when children disagree with their parent) until small enough for a Newton
    polish; every refined zero is re-verified by a micro-contour whose
    winding becomes the multiplicity.  Unresolved boxes are reported, never
    dropped.
    """
    cfg = config or ScanConfig()
    rng = np.random.default_rng(cfg.seed)
    k_min = getattr(family, "k_min", 0.0)
    if k_min:
        nearest = complex(np.clip(0.0, region.re_lo, region.re_hi),
                          np.clip(0.0, region.im_lo, region.im_hi))
        if abs(nearest) < k_min:
            raise ValidationFailure(
                f"scan region reaches within the excluded disk |k| < {k_min:.4g}"
            )

    flog = _LogCache(family)
    windings: list[tuple[Box, int]] = []
    unresolved: list[Box] = []
    found: list[Resonance] = []
    boxes_examined = 0

    def box_winding(b: Box) -> int:
        # no inflation retries here: the quadtree keeps its partition exact
        # and reacts to boundary zeros by re-splitting the parent instead
        return _winding_from_log(flog, b, cfg.boundary_points,
                                 cfg.max_boundary_points)

    def handle_leaf(b: Box, w: int) -> None:
        center = b.center
        k_star = _newton_refine(family, center, cfg)
        if k_star is None or not b.contains(k_star, pad=2.0 * b.diameter):
            try:
                k_star = _bisect_to_zero(family, flog, b, w, cfg, rng)
            except UnresolvedBoxError:
                unresolved.append(b)
                return
        radius = max(cfg.micro_radius_factor * cfg.newton_tol * max(abs(k_star), 1e-6),
                     1e-9)
        micro = Box(k_star.real - radius, k_star.real + radius,
                    k_star.imag - radius, k_star.imag + radius)
        try:
            mult = box_winding(micro)
        except UnresolvedBoxError:
            unresolved.append(b)
            return
        if mult < 1:
            unresolved.append(b)
            return
        boundary_mag = np.median([np.exp(min(flog(c).real, 300.0)) for c in b.corners()])
        residual = float(np.exp(min(flog(k_star).real, 300.0)))
        found.append(Resonance(k=k_star, z=k_star * k_star, multiplicity=mult,
                               residual=residual / max(boundary_mag, 1e-300), box=b))

    stack = [(region, None, 0)]
    while stack:
        b, known_w, depth = stack.pop()
        boxes_examined += 1
        try:
            w = known_w if known_w is not None else box_winding(b)
        except UnresolvedBoxError:
            unresolved.append(b)
            continue
        windings.append((b, w))
        if w == 0:
            continue
        if b.diameter <= cfg.refine_threshold or depth >= cfg.max_depth:
            handle_leaf(b, w)
            continue
        split_ok = False
        for fx, fy in ((0.5, 0.5), (0.5 + 0.1 * rng.random(), 0.5 - 0.1 * rng.random()),
                       (0.5 - 0.1 * rng.random(), 0.5 + 0.1 * rng.random())):
            children = b.split4(fx, fy)
            try:
                if cfg.workers > 1:
                    # ordered map keeps the reduction deterministic
                    from concurrent.futures import ThreadPoolExecutor
                    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                        child_ws = list(pool.map(box_winding, children))
                else:
                    child_ws = [box_winding(c) for c in children]
            except UnresolvedBoxError:
                continue
            if sum(child_ws) == w:
                for c, cw in zip(children, child_ws):
                    if cw:
                        stack.append((c, cw, depth + 1))
                split_ok = True
                break
        if not split_ok:
            unresolved.append(b)

    # merge duplicates found from adjacent leaves
    merged: list[Resonance] = []
    for res in sorted(found, key=lambda r: (r.k.real, r.k.imag)):
        if merged and abs(res.k - merged[-1].k) < max(1e-9, 0.25 * cfg.refine_threshold):
            keep = res if res.residual < merged[-1].residual else merged[-1]
            merged[-1] = keep
            continue
        merged.append(res)

    windings.sort(key=lambda bw: bw[0].key())
    return ScanReport(scanned_region=region, resonances=merged, windings=windings,
                      unresolved=sorted(unresolved, key=Box.key),
                      boxes_examined=boxes_examined)


def scan_annulus(family, r_inner: float, r_outer: float,
                 config: ScanConfig | None = None) -> ScanReport:
    """Scan the square annulus around the origin in four strip boxes.

    Covers everything with ``|k| > r_inner`` inside the bounding square of
    half-width 1.05*r_outer (the unscanned hole is a square strictly inside
    the inner circle), clipped from below at the family's weighted-space
    floor if it has one.
    """
    if not (0 < r_inner < r_outer):
        raise ValidationFailure("need 0 < r_inner < r_outer")
    h = r_inner / 1.6  # hole corner stays inside the inner circle
    big = 1.05 * r_outer
    im_floor = getattr(family, "im_floor", -np.inf)
    bottom = max(-big, im_floor + 1e-9) if np.isfinite(im_floor) else -big
    if bottom > -h:
        raise ValidationFailure("weighted-space floor leaves no room below the hole")
    boxes = [
        Box(-big, -h, bottom, big),
        Box(h, big, bottom, big),
        Box(-h, h, h, big),
        Box(-h, h, bottom, -h),
    ]
    cfg = config or ScanConfig()
    merged: list[Resonance] = []
    windings: list[tuple[Box, int]] = []
    unresolved: list[Box] = []
    examined = 0
    for i, b in enumerate(boxes):
        sub = scan_resonances(family, b, dataclasses.replace(cfg, seed=cfg.seed + i))
        windings.extend(sub.windings)
        unresolved.extend(sub.unresolved)
        examined += sub.boxes_examined
        for res in sub.resonances:
            if any(abs(res.k - m.k) < max(1e-9, 0.25 * cfg.refine_threshold)
                   for m in merged):
                continue  # found twice across a shared strip edge
            merged.append(res)
    merged.sort(key=lambda rr: (rr.k.real, rr.k.imag))
    return ScanReport(scanned_region=Box(-big, big, bottom, big),
                      resonances=merged, windings=windings,
                      unresolved=unresolved, boxes_examined=examined,
                      hole_half=h)


def count_in_annulus(report: ScanReport, r: float, sign, delta: float,
                     sector_only: bool = False) -> int:
    """Total multiplicity in the dyadic annulus r < |k| < 2r.

    Raises when the annulus is not entirely inside the scanned set
    (partial counts would silently undercount).
    """
    if not r > 0:
        raise ValidationFailure("annulus radius must be positive")
    reg = report.scanned_region
    if not (reg.re_lo <= -2 * r and reg.re_hi >= 2 * r
            and reg.im_lo <= -2 * r and reg.im_hi >= 2 * r):
        raise ValidationFailure(
            f"annulus of outer radius {2 * r} is only partially scanned"
        )
    if report.hole_half * math.sqrt(2.0) > r:
        raise ValidationFailure(
            f"the unscanned hole (half-width {report.hole_half:.4g}) pokes into "
            f"the annulus of inner radius {r:.4g}"
        )
    total = 0
    for res in report.resonances:
        mod = abs(res.k)
        if not (r < mod < 2 * r):
            continue
        if sector_only and not sector_membership(res.k, sign, delta):
            continue
        total += res.multiplicity
    return total


def fitted_constant(values, bounds, floor: float = 1e-12):
    """Ratios value/bound and the single constant that would dominate them.

    Used by the counting/trace-formula audits: the theorems assert one
    r-independent constant, which a finite dyadic sample can only probe as
    'the ratios stay within a band'.  Returns (ratios, max_ratio).
    """
    ratios = np.array([v / max(b, floor) for v, b in zip(values, bounds)], dtype=float)
    return ratios, float(ratios.max(initial=0.0))
