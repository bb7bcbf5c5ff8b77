"""Spectral shift profiles and the three verification pipelines.

The regularized shift is the continuously unwrapped argument of the
2-regularized determinant, divided by pi.  The branch is fixed on the
negative axis, where the determinant is real and the unwrapped argument is
``-pi`` times the number of operator eigenvalues below -1 (the eigenvalue
count equals the number of bound states below that energy, which pins the
classical normalization; below all bound states both vanish).  Positive
energies are reached along a quarter arc in the sheet coordinate at radius
``sqrt(lambda_min)``, which stays inside the domain of the holomorphic
extension, so the boundary value at ``lambda + i0`` is evaluated directly at
real k.

The corrected (unregularized) shift adds ``(1/pi) Im`` of the line integral
of the trace of the z-derivative of the weighted resolvent along the same
path; the singular ``1/k^3`` portion of that integrand is integrated in
closed form and only the smooth remainder by the trapezoid rule.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import landau
from .model import (RegionSpec, ValidationFailure, k_in_side_sector,
                    real_interval, region_admissible, sign_value,
                    z_from_polar, PLUS, MINUS)
from .resonances import ScanReport, fitted_constant


class UnwrapError(RuntimeError):
    """Argument unwrapping failed to settle; carries the offending pair."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


@dataclasses.dataclass(frozen=True)
class SSFConfig:
    anchor_im: float = 0.8           # imaginary-axis start height for non-self-adjoint families
    phase_increment_max: float = 0.5 * math.pi
    max_refine_passes: int = 24
    max_chain_nodes: int = 20000
    fd_rel_step: float = 1e-4
    fd_min_step: float = 1e-8
    fd_adapt: int = 5
    real_resonance_guard: float = 10.0
    arc_radius: float | None = None  # default: sqrt of the smallest positive energy


@dataclasses.dataclass
class SSFProfile:
    lambdas: np.ndarray
    xi2: np.ndarray
    xi_prime: np.ndarray
    xi: np.ndarray
    branch_log: list
    anchor_count: int

    def row(self, lam: float) -> tuple[float, float, float]:
        i = int(np.argmin(np.abs(self.lambdas - lam)))
        if abs(self.lambdas[i] - lam) > 1e-12 * max(1.0, abs(lam)):
            raise KeyError(f"energy {lam} not in profile")
        return float(self.xi2[i]), float(self.xi_prime[i]), float(self.xi[i])


def _k_of_lambda(lam: float) -> complex:
    """Sheet coordinate of a real energy: sqrt(lam) above, i*sqrt(-lam) below."""
    if lam > 0:
        return complex(math.sqrt(lam), 0.0)
    return complex(0.0, math.sqrt(-lam))


def _wrap(x: float) -> float:
    return (x + math.pi) % (2.0 * math.pi) - math.pi


class _ChainEval:
    """Cached logdet/trace evaluations along an unwrap chain."""

    def __init__(self, family):
        self.family = family
        self._log: dict[complex, complex] = {}
        self._tr: dict[complex, complex] = {}

    def log(self, k: complex) -> complex:
        k = complex(k)
        v = self._log.get(k)
        if v is None:
            v = complex(self.family.logdet2(k))
            self._log[k] = v
        return v

    def trace(self, k: complex) -> complex:
        k = complex(k)
        v = self._tr.get(k)
        if v is None:
            v = complex(self.family.trace_dz(k))
            self._tr[k] = v
        return v


def _refine_chain(ev: _ChainEval, ks: list[complex], midpoint: Callable,
                  cfg: SSFConfig) -> list[complex]:
    """Insert midpoints until all wrapped phase increments are small."""
    ks = list(ks)
    for _ in range(cfg.max_refine_passes):
        logs = [ev.log(k) for k in ks]
        bad = [i for i in range(len(ks) - 1)
               if abs(_wrap(logs[i + 1].imag - logs[i].imag)) >= cfg.phase_increment_max]
        if not bad:
            return ks
        if len(ks) + len(bad) > cfg.max_chain_nodes:
            i = bad[0]
            raise UnwrapError("unwrap chain exceeded its node budget",
                              pair=(ks[i], ks[i + 1]))
        for i in reversed(bad):
            ks.insert(i + 1, midpoint(ks[i], ks[i + 1]))
    i = bad[0]
    raise UnwrapError(
        f"phase increment would not settle between {ks[i]} and {ks[i + 1]}",
        pair=(ks[i], ks[i + 1]))


def _accumulate(ev: _ChainEval, ks: Sequence[complex], theta0: float,
                corr0: complex, s_trace: complex):
    """Unwrapped phases and the cumulative trace correction along a chain."""
    thetas = [theta0]
    corrs = [corr0]
    logs = [ev.log(k) for k in ks]
    for i in range(len(ks) - 1):
        ka, kb = complex(ks[i]), complex(ks[i + 1])
        thetas.append(thetas[-1] + _wrap(logs[i + 1].imag - logs[i].imag))
        ga = ev.trace(ka) + 1j * s_trace / (2.0 * ka ** 3)
        gb = ev.trace(kb) + 1j * s_trace / (2.0 * kb ** 3)
        exact = 1j * s_trace * (1.0 / kb - 1.0 / ka)
        smooth = 0.5 * (ga + gb) * (kb * kb - ka * ka)
        corrs.append(corrs[-1] + exact + smooth)
    return thetas, corrs


def _arc_anchor(family, ev: _ChainEval, arc_r: float, cfg: SSFConfig):
    """Unwrapped phase at the arc start k = i*arc_r, Krein-normalized."""
    k0 = 1j * arc_r
    if family.imaginary_axis_selfadjoint:
        n = family.count_eigs_below(k0)
        return -math.pi * n, n
    # genuine unwrap down the imaginary axis from a quiet anchor, kept inside
    # the family's validated disk when it has one
    top = max(cfg.anchor_im, 2.0 * arc_r)
    ceiling = getattr(family, "k_max", math.inf)
    top = min(top, 0.98 * ceiling)
    if top <= arc_r:
        return _wrap(ev.log(1j * arc_r).imag), 0
    ss = np.geomspace(top, arc_r, 12)
    ks = [1j * s for s in ss]
    ks = _refine_chain(ev, ks, lambda a, b: 1j * math.sqrt(a.imag * b.imag), cfg)
    theta = _wrap(ev.log(ks[0]).imag)
    logs = [ev.log(k) for k in ks]
    for i in range(len(ks) - 1):
        theta += _wrap(logs[i + 1].imag - logs[i].imag)
    return theta, 0


def compute_profile(family, lambdas, config: SSFConfig | None = None,
                    with_xi_prime: bool = True,
                    real_resonances: Sequence[float] = ()) -> SSFProfile:
    """Sampled (xi2, xi', xi) profile over a set of real energies.

    Negative energies are evaluated by exact eigenvalue counting (the
    determinant is real there); positive ones by continuous unwrapping along
    the quarter-arc path.  ``real_resonances`` lists positive-axis zeros to
    guard the derivative stencil against.
    """
    cfg = config or SSFConfig()
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    if lambdas.size == 0:
        raise ValidationFailure("profile needs at least one energy")
    if np.any(lambdas == 0.0):
        raise ValidationFailure("the origin is excluded from profiles")
    ev = _ChainEval(family)
    s_trace = complex(getattr(family, "signed_trace", 0.0))
    neg = lambdas[lambdas < 0]
    pos = lambdas[lambdas > 0]
    k_min = getattr(family, "k_min", 0.0)

    xi2 = np.empty_like(lambdas)
    xi = np.empty_like(lambdas)
    xi_p = np.full_like(lambdas, np.nan)
    branch_log: list = []
    anchor_count = 0

    for lam in neg:
        k = _k_of_lambda(lam)
        if abs(k) <= k_min:
            raise ValidationFailure(f"|k| for energy {lam} is inside the excluded margin")
        if family.imaginary_axis_selfadjoint:
            n = family.count_eigs_below(k)
            val = -float(n)
        else:
            theta, _ = _arc_anchor(family, ev, abs(k), cfg)
            val = theta / math.pi
        i = int(np.searchsorted(lambdas, lam))
        xi2[i] = val
        xi[i] = val  # the trace correction is real on the negative axis
        if with_xi_prime:
            xi_p[i] = 0.0  # locally constant between crossings
        branch_log.append({"lambda": float(lam), "k": complex(k), "theta": val * math.pi})

    if pos.size:
        arc_r = cfg.arc_radius if cfg.arc_radius is not None else math.sqrt(pos[0])
        if arc_r > math.sqrt(pos[0]) + 1e-15:
            raise ValidationFailure("arc radius must not exceed the smallest positive sqrt(energy)")
        if arc_r <= k_min:
            raise ValidationFailure(
                f"arc radius {arc_r:.3g} is inside the excluded margin {k_min:.3g}")
        theta0, anchor_count = _arc_anchor(family, ev, arc_r, cfg)

        thetas_arc = list(np.linspace(0.5 * math.pi, 0.0, 16))
        arc_ks = [arc_r * complex(math.cos(a), math.sin(a)) for a in thetas_arc[::-1]]
        arc_ks = arc_ks[::-1]  # from i*arc_r to arc_r

        def arc_mid(a: complex, b: complex) -> complex:
            ang = 0.5 * (math.atan2(a.imag, a.real) + math.atan2(b.imag, b.real))
            return arc_r * complex(math.cos(ang), math.sin(ang))

        arc_ks = _refine_chain(ev, arc_ks, arc_mid, cfg)
        th_arc, co_arc = _accumulate(ev, arc_ks, theta0, 0.0 + 0.0j, s_trace)

        ray_ks = sorted({math.sqrt(l) for l in pos} | {arc_r})
        ray_ks = [complex(x, 0.0) for x in ray_ks]
        ray_ks = _refine_chain(ev, ray_ks, lambda a, b: 0.5 * (a + b), cfg)
        th_ray, co_ray = _accumulate(ev, ray_ks, th_arc[-1], co_arc[-1], s_trace)

        lookup = {k.real: (t, c) for k, t, c in zip(ray_ks, th_ray, co_ray)}
        for lam in pos:
            root = math.sqrt(lam)
            key = min(lookup, key=lambda x: abs(x - root))
            if abs(key - root) > 1e-12 * max(1.0, root):
                raise AssertionError("requested energy lost from the unwrap chain")
            theta, corr = lookup[key]
            i = int(np.searchsorted(lambdas, lam))
            xi2[i] = theta / math.pi
            xi[i] = (theta + corr.imag) / math.pi
            branch_log.append({"lambda": float(lam), "k": complex(root, 0.0),
                               "theta": theta, "corr_im": corr.imag})
        if with_xi_prime:
            for lam in pos:
                i = int(np.searchsorted(lambdas, lam))
                xi_p[i] = xi_prime_at(family, float(lam), ev=ev, cfg=cfg,
                                      theta_ref=xi2[i] * math.pi,
                                      real_resonances=real_resonances)

    return SSFProfile(lambdas=lambdas, xi2=xi2, xi_prime=xi_p, xi=xi,
                      branch_log=branch_log, anchor_count=anchor_count)


def xi2_at(family, lam: float, config: SSFConfig | None = None) -> float:
    """The regularized shift at one energy."""
    return float(compute_profile(family, [lam], config, with_xi_prime=False).xi2[0])


def xi_prime_at(family, lam: float, config: SSFConfig | None = None,
                ev: _ChainEval | None = None, cfg: SSFConfig | None = None,
                theta_ref: float | None = None,
                real_resonances: Sequence[float] = ()) -> float:
    """Derivative of the shift at a positive energy.

    Central differences on the unwrapped argument with one Richardson pass
    and adaptive step, plus the trace correction.  Energies within the guard
    distance of a known real resonance are refused (the derivative carries a
    delta there).
    """
    cfg = cfg or config or SSFConfig()
    if lam <= 0:
        raise ValidationFailure("the derivative sampler works on positive energies")
    ev = ev or _ChainEval(family)
    k = math.sqrt(lam)

    if theta_ref is None:
        theta_ref = _wrap(ev.log(complex(k, 0.0)).imag)

    h = max(cfg.fd_rel_step * lam, cfg.fd_min_step)
    for w in real_resonances:
        if abs(lam - w) < cfg.real_resonance_guard * h:
            raise ValidationFailure(
                f"energy {lam} is within the guard distance of the real resonance {w}")

    def theta_at(lmb: float, ref: float) -> float:
        val = ev.log(complex(math.sqrt(lmb), 0.0)).imag
        return ref + _wrap(val - ref)

    def stencil(step: float) -> tuple[float, float]:
        tp = theta_at(lam + step, theta_ref)
        tm = theta_at(lam - step, theta_ref)
        d1 = (tp - tm) / (2.0 * step)
        tp2 = theta_at(lam + 0.5 * step, theta_ref)
        tm2 = theta_at(lam - 0.5 * step, theta_ref)
        d2 = (tp2 - tm2) / step
        return d1, d2

    for _ in range(cfg.fd_adapt):
        d1, d2 = stencil(h)
        rich = (4.0 * d2 - d1) / 3.0
        if abs(d2 - d1) <= 0.05 * max(abs(rich), 1e-12):
            break
        h *= 0.5
        if lam - h <= 0:
            break
    xi2_prime = rich / math.pi
    corr = ev.trace(complex(k, 0.0)).imag / math.pi
    return float(xi2_prime + corr)


def xi_prime_resolvent(family, lam: float) -> float:
    """Derivative of the shift via the resolvent trace (delta-free identity).

    Equals the stencil route wherever both are defined; used as the fast
    inner evaluator of the quadrature pipelines.
    """
    if lam <= 0:
        raise ValidationFailure("positive energies only")
    return float(family.resolved_trace(_k_of_lambda(lam)).imag / math.pi)


# ---------------------------------------------------------------------------
# bound-state bookkeeping on the negative axis
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class JumpScan:
    jumps: tuple[tuple[float, int], ...]       # (energy, xi jump) via determinant sign
    crossings: tuple[float, ...]               # via eigenvalue -1 crossings
    max_gap: float                             # worst |jump - crossing| pairing distance
    tangency_flagged: tuple[float, ...]


def negative_axis_jumps(family, lo: float, hi: float, n_grid: int = 96,
                        refine_tol: float = 1e-12) -> JumpScan:
    """Locate integer jumps of the shift on a negative-axis window.

    Two independent routes: sign changes of the (real) determinant, refined
    by bisection, and eigenvalue crossings through -1 located by counting.
    The grid is geometric in |energy| because bound states accumulate at the
    origin.  Both lists are returned with the worst pairing distance.
    """
    if not (lo < hi < 0):
        raise ValidationFailure("window must satisfy lo < hi < 0")
    if not family.imaginary_axis_selfadjoint:
        raise ValidationFailure("jump scanning requires a sign-definite family")
    lams = -np.geomspace(-lo, -hi, n_grid)
    ev = _ChainEval(family)

    def det_signed(lam: float) -> float:
        v = ev.log(_k_of_lambda(lam))
        # real-valued determinant: the phase is 0 or pi up to rounding
        return math.cos(v.imag) * math.exp(max(min(v.real, 300.0), -300.0))

    vals = np.array([det_signed(l) for l in lams])
    count_rows = [family.count_eigs_below_per_block(_k_of_lambda(l)) for l in lams]
    counts = np.array([sum(row) for row in count_rows])

    jumps = []
    for i in range(n_grid - 1):
        if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0.0:
            lam_star = brentq(det_signed, lams[i], lams[i + 1], xtol=refine_tol)
            jumps.append((float(lam_star), int(-(counts[i + 1] - counts[i]))))

    crossings = []
    for i in range(n_grid - 1):
        row_a, row_b = count_rows[i], count_rows[i + 1]
        changed = [bi for bi in range(len(row_a)) if row_a[bi] != row_b[bi]]
        for bi in changed:
            a, b = lams[i], lams[i + 1]
            ca = row_a[bi]
            for _ in range(80):
                m = 0.5 * (a + b)
                if family.count_eigs_below_per_block(_k_of_lambda(m), blocks=[bi])[0] == ca:
                    a = m
                else:
                    b = m
                if b - a < refine_tol:
                    break
            crossings.append(float(0.5 * (a + b)))
    crossings.sort()

    tangency = []
    scale = np.abs(vals).max() or 1.0
    for i in range(1, n_grid - 1):
        if (abs(vals[i]) < 1e-10 * scale and vals[i - 1] * vals[i + 1] > 0):
            tangency.append(float(lams[i]))

    max_gap = 0.0
    for lam_star, _ in jumps:
        if crossings:
            max_gap = max(max_gap, min(abs(lam_star - c) for c in crossings))
        else:
            max_gap = math.inf
    if len(jumps) != len(crossings):
        max_gap = math.inf

    return JumpScan(jumps=tuple(jumps), crossings=tuple(crossings),
                    max_gap=max_gap, tangency_flagged=tuple(tangency))


# ---------------------------------------------------------------------------
# profile decomposition into resonance peaks and smooth background
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class BreitWignerDecomposition:
    interval: tuple[float, float]
    mus: np.ndarray
    xi_prime: np.ndarray
    lorentzian_sum: np.ndarray
    residual: np.ndarray
    delta_locations: tuple[float, ...]
    resonances_used: tuple
    region: RegionSpec


def breit_wigner_decompose(region: RegionSpec, report: ScanReport,
                           mus, xi_prime_vals, real_tol: float = 1e-8) -> BreitWignerDecomposition:
    """Subtract the resonance peak sum from a sampled shift derivative.

    Resonances are drawn from the scan restricted to the side's branch image
    of the scaled outer sector; each contributes Im(w)/(pi |mu - w|^2) with
    its multiplicity.  Real resonances inside the sampled interval are
    reported as delta locations and excluded from the peak sum.
    """
    mus = np.asarray(mus, dtype=float)
    xi_prime_vals = np.asarray(xi_prime_vals, dtype=float)
    if mus.shape != xi_prime_vals.shape:
        raise ValidationFailure("sample grids disagree")
    scale = region.r
    lo, hi = real_interval(region, "inner", scale)
    if mus.min() < min(lo, hi) - 1e-12 or mus.max() > max(lo, hi) + 1e-12:
        raise ValidationFailure("samples leave the scaled inner interval")

    # coverage: the k-image of the scaled outer sector must be scanned
    bounds = region.outer
    for rho in (bounds.rho_min, bounds.rho_max):
        for ang in np.linspace(bounds.ang_min, bounds.ang_max, 7):
            from .model import k_from_z
            kb = k_from_z(region.side, z_from_polar(region.side, rho * scale, ang))
            if not report.scanned_region.contains(kb):
                raise ValidationFailure(
                    f"scan region does not cover the scaled sector (missing k = {kb:.4g})")

    used = []
    deltas = []
    lor = np.zeros_like(mus)
    for res in report.resonances:
        if not k_in_side_sector(region, res.k, "outer", scale):
            continue
        w = res.z
        if abs(w.imag) <= real_tol * max(abs(w), 1e-12):
            if min(lo, hi) <= w.real <= max(lo, hi):
                deltas.append(w.real)
            continue
        used.append(res)
        lor += res.multiplicity * w.imag / (np.pi * np.abs(mus - w) ** 2)

    return BreitWignerDecomposition(
        interval=(float(lo), float(hi)), mus=mus, xi_prime=xi_prime_vals,
        lorentzian_sum=lor, residual=xi_prime_vals - lor,
        delta_locations=tuple(sorted(deltas)), resonances_used=tuple(used),
        region=region)


def lorentzian_window_mass(mus, excess, w: complex, half_width_mult: float = 5.0) -> float:
    """Window integral of a peak, corrected for the truncated tails.

    A unit-mass peak of half-width |Im w| integrates over +-H |Im w| to
    (2/pi) arctan(H); dividing by that factor recovers the (signed) mass.
    """
    mus = np.asarray(mus, dtype=float)
    excess = np.asarray(excess, dtype=float)
    w = complex(w)
    half = half_width_mult * abs(w.imag)
    mask = np.abs(mus - w.real) <= half
    if mask.sum() < 8:
        raise ValidationFailure("too few samples inside the peak window")
    if w.real - half < mus.min() - 1e-12 or w.real + half > mus.max() + 1e-12:
        raise ValidationFailure("peak window leaves the sampled interval")
    raw = float(np.trapezoid(excess[mask], mus[mask]))
    return raw / ((2.0 / math.pi) * math.atan(half_width_mult))


def residual_envelope_ratios(residual_sups, rs, m_perp: float):
    """Ratios of residual sups against the |ln r| r^(-1/m) envelope."""
    bounds = [abs(math.log(r)) * r ** (-1.0 / m_perp) for r in rs]
    return fitted_constant(residual_sups, bounds)


# ---------------------------------------------------------------------------
# low-energy singularity pipeline
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class SingularityReport:
    lambdas: np.ndarray
    xi: np.ndarray
    phi: np.ndarray
    ratios: np.ndarray
    envelope_constant: float
    trend_improved: bool
    sigma_bound_ok: bool


def phi_singularity_check(family, spectrum: landau.ToeplitzSpectrum, sign,
                          lambdas, config: SSFConfig | None = None,
                          phi_floor: float = 1e-8) -> SingularityReport:
    """Ratio of the corrected shift against the arctan trace along a sequence.

    The sequence is truncated where the arctan trace falls below the floor.
    Also audits the elementary comparison bound between the damped Schatten
    weight at sqrt(lambda) and the arctan trace.
    """
    j = sign_value(sign)
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    if np.any(lambdas <= 0):
        raise ValidationFailure("singularity sequence must be positive")
    phis = np.array([landau.phi(spectrum, l) for l in lambdas])
    keep = phis >= phi_floor
    lambdas, phis = lambdas[keep], phis[keep]
    if lambdas.size < 3:
        raise ValidationFailure("sequence too short after the phi floor")

    prof = compute_profile(family, lambdas, config, with_xi_prime=False)
    ratios = math.pi * prof.xi / (j * phis)

    resid = np.abs(math.pi * prof.xi - j * phis)
    env = np.sqrt(phis) + np.log(lambdas) ** 2
    const = float((resid / env).max())

    lam_min = lambdas[0]
    decade = lambdas <= 10.0 * lam_min
    dev = np.abs(ratios[decade] - 1.0)
    half = max(1, dev.size // 2)
    trend = bool(np.mean(dev[:half]) <= np.mean(dev[half:]) + 0.05)

    sigma_ok = all(
        landau.sigma_p(spectrum, math.sqrt(l), 2) <= landau.phi(spectrum, l) + 1e-12
        for l in lambdas)

    return SingularityReport(lambdas=lambdas, xi=prof.xi, phi=phis, ratios=ratios,
                             envelope_constant=const, trend_improved=trend,
                             sigma_bound_ok=sigma_ok)


# ---------------------------------------------------------------------------
# local trace formula pipeline
# ---------------------------------------------------------------------------


def _glue(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_cutoff(x, support: tuple[float, float], plateau: tuple[float, float]) -> np.ndarray:
    """C-infinity bump: 1 on the plateau, 0 outside the support."""
    a0, b0 = support
    a1, b1 = plateau
    if not (a0 < a1 < b1 < b0):
        raise ValidationFailure("need support edge < plateau < support edge")
    x = np.asarray(x, dtype=float)
    up = _glue((x - a0) / (a1 - a0))
    up_c = _glue((a1 - x) / (a1 - a0))
    rise = up / (up + up_c + 1e-300)
    dn = _glue((b0 - x) / (b0 - b1))
    dn_c = _glue((x - b1) / (b0 - b1))
    fall = dn / (dn + dn_c + 1e-300)
    out = rise * fall
    out[(x <= a0) | (x >= b0)] = 0.0
    out[(x >= a1) & (x <= b1)] = 1.0
    return out


@dataclasses.dataclass
class TraceCheckReport:
    r: float
    lhs: float
    rhs: float
    diff: float
    n_bound: float
    sup_f: float
    ratio: float
    resonances_used: int


def trace_formula_check(region: RegionSpec, f_coeffs, support, plateau, r: float,
                        report: ScanReport, family,
                        spectrum: landau.ToeplitzSpectrum, s1: float,
                        n_quad: int = 64) -> TraceCheckReport:
    """One scale of the local trace identity audit.

    LHS pairs the shift derivative against the scaled cutoff-times-polynomial
    test function (delta contributions from real resonances added
    explicitly); RHS sums the polynomial over scanned resonances in the
    scaled inner window.  The report carries the ratio of the discrepancy to
    the theoretical budget.
    """
    if not region_admissible(region, PLUS) and not region_admissible(region, MINUS):
        raise ValidationFailure("region admits no sign at all")
    f_coeffs = np.asarray(f_coeffs, dtype=complex)

    def f(z):
        return np.polynomial.polynomial.polyval(z, f_coeffs)

    a0, b0 = support
    if region.side == MINUS:
        raise ValidationFailure("the shipped pipeline audits the positive side")
    lo, hi = r * a0, r * b0
    base_x, base_w = np.polynomial.legendre.leggauss(n_quad)
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * base_x
    weights = 0.5 * (hi - lo) * base_w

    reals = [res.z.real for res in report.resonances
             if abs(res.z.imag) <= 1e-8 * max(abs(res.z), 1e-12)
             and lo <= res.z.real <= hi
             and k_in_side_sector(region, res.k, "outer", r)]

    integ = 0.0
    spacing = (hi - lo) / n_quad
    for x, wgt in zip(nodes, weights):
        if any(abs(x - w) < 10.0 * spacing for w in reals):
            continue  # excised; the delta term accounts for the peak
        psi = smooth_cutoff(np.array([x / r]), support, plateau)[0]
        if psi == 0.0:
            continue
        integ += wgt * xi_prime_resolvent(family, x) * psi * f(x / r).real

    lhs = -integ + sum(
        smooth_cutoff(np.array([w / r]), support, plateau)[0] * f(w / r).real
        for w in reals)

    rhs = 0.0
    used = 0
    for res in report.resonances:
        if k_in_side_sector(region, res.k, "inner", r):
            rhs += res.multiplicity * f(res.z / r).real
            used += 1

    n_bound = (landau.counting_function(spectrum, s1 * math.sqrt(r))
               * abs(math.log(r))
               + landau.n_tilde_p(spectrum, 0.5 * s1 * math.sqrt(r), 1)
               + landau.n_tilde_p(spectrum, 0.5 * s1 * math.sqrt(r), 2))

    sup_f = 0.0
    for rho in np.linspace(region.outer.rho_min, region.outer.rho_max, 40):
        for ang in np.linspace(region.outer.ang_min, min(region.outer.ang_max, 0.0), 25):
            if region.inner.contains(rho, ang):
                continue
            z = z_from_polar(region.side, rho, ang)
            if z.imag > 1e-15:
                continue
            sup_f = max(sup_f, abs(f(z)))

    diff = abs(lhs - rhs)
    ratio = diff / max(sup_f * n_bound, 1e-300)
    return TraceCheckReport(r=r, lhs=float(lhs), rhs=float(rhs), diff=float(diff),
                            n_bound=float(n_bound), sup_f=float(sup_f),
                            ratio=float(ratio), resonances_used=used)
