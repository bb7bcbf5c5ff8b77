"""Domain records and admissibility checks: field data, potentials, scan regions.

Geometry conventions used throughout the package: points in 3-space are
``x = (x_perp, t)`` with ``x_perp`` a pair of transverse coordinates and
``t`` the coordinate along the field axis.  ``bracket(y)`` denotes the
smoothed absolute value ``sqrt(1 + y^2)``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

PLUS = "plus"
MINUS = "minus"
INDEFINITE = "indefinite"

_SIGN_VALUE = {PLUS: 1.0, MINUS: -1.0, 1: 1.0, -1: -1.0, 1.0: 1.0, -1.0: -1.0}


class ValidationFailure(ValueError):
    """A potential, region or configuration failed its admissibility checks."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge.

    ``history`` holds the last refinement values so the caller can see how
    far apart the final two estimates were.
    """

    def __init__(self, message: str, history=()):
        super().__init__(message)
        self.history = tuple(history)


def bracket(y):
    """Smoothed absolute value ``sqrt(1 + y**2)``, elementwise."""
    y = np.asarray(y, dtype=float)
    return np.sqrt(1.0 + y * y)


def sign_value(sign) -> float:
    """Map a sign flag ('plus'/'minus' or +-1) to the scalar +-1.0."""
    try:
        return _SIGN_VALUE[sign]
    except (KeyError, TypeError):
        raise ValueError(f"not a definite sign flag: {sign!r}") from None


@dataclasses.dataclass(frozen=True)
class MagneticModel:
    """Constant-strength field data.

    ``osc_phi`` is the oscillation of the auxiliary scalar potential; it is
    zero in the supported constant-field case and kept as a field only so the
    gap formula stays written in its general form.  ``kernel_hook`` optionally
    supplies a replacement transverse projection kernel (callable with the
    same signature as :func:`llres.landau.lll_projection_kernel` minus the
    field-strength argument) for non-constant fields; no shipped pipeline
    sets it.
    """

    b0: float
    gamma: float
    osc_phi: float = 0.0
    kernel_hook: Callable | None = None

    def __post_init__(self):
        if not self.b0 > 0:
            raise ValidationFailure(f"field strength must be positive, got {self.b0}")
        if not self.gamma > 0:
            raise ValidationFailure(f"decay rate must be positive, got {self.gamma}")
        if self.osc_phi != 0.0 and self.kernel_hook is None:
            raise ValidationFailure(
                "non-constant fields (osc_phi != 0) require a kernel_hook; "
                "the built-in kernel is the constant-field one"
            )

    @property
    def zeta(self) -> float:
        """Spectral gap 2*b0*exp(-2*osc_phi); equals 2*b0 for constant field."""
        return 2.0 * self.b0 * math.exp(-2.0 * self.osc_phi)

    @property
    def n_gamma_zeta(self) -> float:
        """Disk radius bound min(gamma/2, sqrt(zeta)); always recomputed."""
        return min(self.gamma / 2.0, math.sqrt(self.zeta))

    def axis_truncation(self) -> float:
        """Default axis truncation for weighted line integrals."""
        return max(10.0 / self.gamma, 20.0)


# ---------------------------------------------------------------------------
# pointwise 2x2 hermitian matrix functions
# ---------------------------------------------------------------------------


def _eig_apply(v: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to a stack of hermitian matrices via eigh."""
    v = np.asarray(v)
    if v.shape[-1] == 1:
        return fn(v.real).astype(v.dtype) * (1.0 + 0.0j) if np.iscomplexobj(v) else fn(v.real)
    w, u = np.linalg.eigh(v)
    return (u * fn(w)[..., None, :]) @ np.conj(np.swapaxes(u, -1, -2))


def matrix_abs(v: np.ndarray) -> np.ndarray:
    """Pointwise matrix absolute value sqrt(V*V) of a hermitian stack."""
    return _eig_apply(v, np.abs)


def matrix_abs_sqrt(v: np.ndarray) -> np.ndarray:
    """Pointwise |V|^(1/2)."""
    return _eig_apply(v, lambda w: np.sqrt(np.abs(w)))


def matrix_signed_sqrt(v: np.ndarray) -> np.ndarray:
    """Pointwise J|V|^(1/2) = V |V|^(-1/2), with zero eigenvalues mapped to 0."""
    return _eig_apply(v, lambda w: np.sign(w) * np.sqrt(np.abs(w)))


def matrix_sign(v: np.ndarray) -> np.ndarray:
    """Pointwise matrix sign of a hermitian stack (0 on the kernel)."""
    return _eig_apply(v, np.sign)


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ProfileClass:
    """Transverse decay regime of the reduced weight.

    kind 'A1': power decay, exponent ``m`` (and implicitly a continuous
    angular factor; the shipped catalog uses radial profiles only).
    kind 'A2': stretched-Gaussian decay exp(-mu r^(2 beta)).
    kind 'A3': compactly supported, ``support_radius``.
    kind 'other': no asymptotic law claimed.
    """

    kind: str
    m: float | None = None
    beta: float | None = None
    mu: float | None = None
    support_radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("A1", "A2", "A3", "other"):
            raise ValidationFailure(f"unknown profile class {self.kind!r}")
        if self.kind == "A1" and (self.m is None or self.m <= 0):
            raise ValidationFailure("A1 profiles need a positive exponent m")
        if self.kind == "A2" and (self.beta is None or self.mu is None):
            raise ValidationFailure("A2 profiles need beta and mu")
        if self.kind == "A3" and (self.support_radius is None or self.support_radius <= 0):
            raise ValidationFailure("A3 profiles need a positive support radius")


@dataclasses.dataclass(frozen=True)
class SeparableParts:
    """Factored form  V(x_perp, t) = spin_matrix * w(|x_perp|) * g(t).

    ``transverse_profile`` and ``axis_profile`` are vectorized nonnegative
    scalar callables; ``spin_matrix`` is a constant hermitian matrix (1x1 in
    scalar mode).  Potentials carrying this structure get the fast radial
    block-diagonal assembly path.
    """

    spin_matrix: np.ndarray
    transverse_profile: Callable[[np.ndarray], np.ndarray]
    axis_profile: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.spin_matrix, dtype=complex))
        object.__setattr__(self, "spin_matrix", m)
        if m.shape[0] != m.shape[1]:
            raise ValidationFailure("spin matrix must be square")
        if not np.allclose(m, m.conj().T, atol=1e-13):
            raise ValidationFailure("spin matrix must be hermitian")


@dataclasses.dataclass(frozen=True)
class PotentialSpec:
    """A 2x2 hermitian (or scalar, in scalar mode) perturbation.

    ``entries(x_perp, t)`` must accept ``x_perp`` of shape (..., 2) and ``t``
    of shape (...,) and return a stack (..., s, s) with s the spin dimension.
    The declared envelope is
    ``|entries| <= envelope_const * bracket(|x_perp|)**(-m_perp) * exp(-gamma*bracket(t))``.
    Potentials decaying in |t| rather than bracket(t) are admissible whenever
    they still satisfy the bracket-form bound (exp(-g*|t|) <= e^g*exp(-g*bracket(t)),
    so they do, with an adjusted constant).
    """

    entries: Callable
    m_perp: float
    gamma: float
    envelope_const: float
    sign: str
    profile_class: ProfileClass
    scalar_mode: bool = False
    separable: SeparableParts | None = None

    @property
    def spin_dim(self) -> int:
        return 1 if self.scalar_mode else 2

    def sample(self, x_perp, t) -> np.ndarray:
        """Evaluate the potential matrix on a broadcast batch of points."""
        x_perp = np.asarray(x_perp, dtype=float)
        t = np.asarray(t, dtype=float)
        v = np.asarray(self.entries(x_perp, t), dtype=complex)
        s = self.spin_dim
        if v.shape[-2:] != (s, s):
            raise ValidationFailure(
                f"entries returned shape {v.shape}, expected trailing ({s}, {s})"
            )
        return v


def require_assemblable(spec: PotentialSpec, model: MagneticModel) -> None:
    """Cheap hypothesis checks shared by every operator-building routine."""
    if spec.m_perp <= 2:
        raise ValidationFailure(
            f"transverse decay exponent must exceed 2, got {spec.m_perp}"
        )
    if spec.gamma != model.gamma:
        raise ValidationFailure(
            f"potential decay rate {spec.gamma} does not match the model rate {model.gamma}"
        )


def default_sample_grid(gamma: float, r_max: float = 6.0, n_r: int = 6,
                        n_ang: int = 8, t_max: float | None = None,
                        n_t: int = 9) -> np.ndarray:
    """A small 3d validation grid, shape (n, 3): columns (x1, x2, t)."""
    if t_max is None:
        t_max = 6.0 / gamma + 2.0
    radii = np.linspace(0.0, r_max, n_r + 1)[1:]
    angles = np.linspace(0.0, 2.0 * np.pi, n_ang, endpoint=False)
    ts = np.linspace(-t_max, t_max, n_t)
    pts = [(0.0, 0.0, t) for t in ts]
    for rho in radii:
        for a in angles:
            for t in ts:
                pts.append((rho * np.cos(a), rho * np.sin(a), t))
    return np.array(pts)


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    max_envelope_ratio: float
    max_hermiticity_defect: float
    definiteness_verdict: str
    degenerate: bool
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def validate_potential(spec: PotentialSpec, model: MagneticModel,
                       samples: np.ndarray | None = None, *,
                       envelope_rtol: float = 1e-9,
                       hermiticity_tol: float = 1e-10,
                       definiteness_tol: float = 1e-10) -> ValidationReport:
    """Check a potential against its declared envelope, hermiticity and sign.

    Returns a report; it never raises.  A report with ``passed == False``
    carries one failure string per violated condition.
    """
    failures: list[str] = []
    if spec.m_perp <= 2:
        failures.append(
            f"transverse decay exponent m_perp={spec.m_perp} must exceed 2"
        )
    if spec.gamma != model.gamma:
        failures.append(
            f"axis decay rate {spec.gamma} differs from the model rate {model.gamma}"
        )
    if samples is None:
        samples = default_sample_grid(model.gamma)
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValidationFailure("sample grid must be nonempty")

    x_perp, t = samples[:, :2], samples[:, 2]
    v = spec.sample(x_perp, t)

    envelope = (spec.envelope_const
                * bracket(np.linalg.norm(x_perp, axis=1)) ** (-spec.m_perp)
                * np.exp(-spec.gamma * bracket(t)))
    mags = np.abs(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = mags / envelope[:, None, None]
    ratios = np.where(mags == 0.0, 0.0, ratios)  # a vanishing entry never violates
    max_ratio = float(np.nan_to_num(ratios, nan=np.inf).max())
    if max_ratio > 1.0 + envelope_rtol:
        failures.append(f"envelope bound violated: max ratio {max_ratio:.3e}")

    herm = float(np.abs(v - np.conj(np.swapaxes(v, -1, -2))).max())
    if herm > hermiticity_tol:
        failures.append(f"hermiticity defect {herm:.3e} exceeds {hermiticity_tol:.1e}")

    if herm <= hermiticity_tol:
        eigs = np.linalg.eigvalsh(0.5 * (v + np.conj(np.swapaxes(v, -1, -2))))
    else:
        eigs = np.zeros((len(samples), spec.spin_dim))
    lo, hi = float(eigs.min()), float(eigs.max())
    degenerate = max(abs(lo), abs(hi)) <= definiteness_tol
    if degenerate:
        verdict = "indefinite/zero"
    elif lo >= -definiteness_tol:
        verdict = PLUS
    elif hi <= definiteness_tol:
        verdict = MINUS
    else:
        verdict = INDEFINITE

    if spec.sign == PLUS and not degenerate and verdict != PLUS:
        failures.append(f"declared sign 'plus' but sampled verdict is {verdict!r}")
    if spec.sign == MINUS and not degenerate and verdict != MINUS:
        failures.append(f"declared sign 'minus' but sampled verdict is {verdict!r}")

    return ValidationReport(
        max_envelope_ratio=max_ratio,
        max_hermiticity_defect=herm,
        definiteness_verdict=verdict,
        degenerate=degenerate,
        failures=tuple(failures),
    )


def transverse_weight_W(spec: PotentialSpec, x_perp, tol: float = 1e-10,
                        max_doublings: int = 10) -> float:
    """Reduced transverse weight: the axis integral of the (1,1) entry of |V|.

    Uses composite Gauss-Legendre panels on a truncated line, doubling the
    panel count until two successive estimates agree to ``tol``.
    """
    x_perp = np.asarray(x_perp, dtype=float)
    t_cut = max(1.15 * (-math.log(tol)) / spec.gamma, 10.0 / spec.gamma)

    def integrate(n_panels: int) -> float:
        base_x, base_w = np.polynomial.legendre.leggauss(12)
        edges = np.linspace(-t_cut, t_cut, n_panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        nodes = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
        weights = (half[:, None] * base_w[None, :]).ravel()
        v = spec.sample(np.broadcast_to(x_perp, (nodes.size, 2)), nodes)
        vals = matrix_abs(v)[:, 0, 0].real
        return float(np.dot(weights, vals))

    n_panels = 8
    prev = integrate(n_panels)
    history = [prev]
    for _ in range(max_doublings):
        n_panels *= 2
        cur = integrate(n_panels)
        history.append(cur)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(
        f"axis quadrature for the transverse weight did not converge at {x_perp}",
        history=history[-2:],
    )


# ---------------------------------------------------------------------------
# sectors and regions in the spectral plane
# ---------------------------------------------------------------------------


def sector_membership(k: complex, sign, delta: float) -> bool:
    """Cone test: True iff -delta*J*Im(k) <= |Re(k)|.

    For J=+ this excludes a cone around the negative imaginary axis, for J=-
    around the positive imaginary axis.
    """
    if not delta > 0:
        raise ValidationFailure("cone aperture delta must be positive")
    j = sign_value(sign)
    k = complex(k)
    return bool(-delta * j * k.imag <= abs(k.real))


def side_admissible(side: str, sign, theta0: float, epsilon0: float) -> bool:
    """Compatibility of a side of the origin with a definite sign.

    The right side is admissible for both signs; the left side only when the
    perturbation is nonnegative.
    """
    j = sign_value(sign)
    target = -j * math.pi / 2.0
    if side == PLUS:
        lo, hi = -theta0, epsilon0
    elif side == MINUS:
        lo, hi = math.pi / 2.0 - epsilon0, math.pi / 2.0 + theta0
    else:
        raise ValidationFailure(f"side must be 'plus' or 'minus', got {side!r}")
    return not (lo <= target <= hi)


@dataclasses.dataclass(frozen=True)
class SectorBounds:
    """An annular sector in side-local polar coordinates (rho, ang)."""

    rho_min: float
    rho_max: float
    ang_min: float
    ang_max: float

    def __post_init__(self):
        if not (0 < self.rho_min < self.rho_max):
            raise ValidationFailure("need 0 < rho_min < rho_max")
        if not self.ang_min < self.ang_max:
            raise ValidationFailure("need ang_min < ang_max")

    def contains(self, rho: float, ang: float) -> bool:
        return (self.rho_min < rho < self.rho_max
                and self.ang_min < ang < self.ang_max)

    def strictly_inside(self, other: "SectorBounds") -> bool:
        return (other.rho_min < self.rho_min and self.rho_max < other.rho_max
                and other.ang_min < self.ang_min and self.ang_max < other.ang_max)


@dataclasses.dataclass(frozen=True)
class RegionSpec:
    """A pair of nested sectors (inner study window, outer control region).

    On the 'plus' side points are ``z = rho*exp(i*ang)``; on the 'minus' side
    ``z = -rho*exp(-i*ang)``.  The angular coordinates must stay within
    (-2*theta0, 2*epsilon0).
    """

    side: str
    theta0: float
    epsilon0: float
    inner: SectorBounds
    outer: SectorBounds
    r: float = 1.0
    sector_delta: float = 1.0

    def __post_init__(self):
        if self.side not in (PLUS, MINUS):
            raise ValidationFailure(f"side must be 'plus' or 'minus', got {self.side!r}")
        if not (0 < min(self.theta0, self.epsilon0)
                and max(self.theta0, self.epsilon0) < math.pi / 2):
            raise ValidationFailure("sector half-angles must lie in (0, pi/2)")
        if not self.inner.strictly_inside(self.outer):
            raise ValidationFailure("inner window must be strictly inside the outer region")
        if self.outer.ang_min < -2 * self.theta0 or self.outer.ang_max > 2 * self.epsilon0:
            raise ValidationFailure("outer region leaves the declared angular sector")
        if not self.r > 0:
            raise ValidationFailure("scaling parameter r must be positive")
        if not self.sector_delta > 0:
            raise ValidationFailure("sector_delta must be positive")


def region_admissible(region: RegionSpec, sign) -> bool:
    """Side/sign compatibility test for a region."""
    return side_admissible(region.side, sign, region.theta0, region.epsilon0)


def validate_region(region: RegionSpec, model: MagneticModel) -> None:
    """Reject regions escaping the validated disk around the origin."""
    n2 = model.n_gamma_zeta ** 2
    if region.r * region.outer.rho_max >= n2:
        raise ValidationFailure(
            f"scaled outer radius {region.r * region.outer.rho_max:.4g} must stay "
            f"below the squared disk bound {n2:.4g}"
        )


def side_polar(side: str, z: complex) -> tuple[float, float]:
    """Side-local polar coordinates of a spectral point."""
    z = complex(z)
    if side == PLUS:
        return abs(z), math.atan2(z.imag, z.real)
    if side == MINUS:
        w = -z
        return abs(z), -math.atan2(w.imag, w.real)
    raise ValidationFailure(f"side must be 'plus' or 'minus', got {side!r}")


def z_from_polar(side: str, rho: float, ang: float) -> complex:
    if side == PLUS:
        return rho * complex(math.cos(ang), math.sin(ang))
    if side == MINUS:
        return -rho * complex(math.cos(-ang), math.sin(-ang))
    raise ValidationFailure(f"side must be 'plus' or 'minus', got {side!r}")


def k_from_z(side: str, z: complex) -> complex:
    """Sheet coordinate of a spectral point, per the side's square-root branch."""
    rho, ang = side_polar(side, z)
    root = math.sqrt(rho)
    if side == PLUS:
        return root * complex(math.cos(ang / 2), math.sin(ang / 2))
    return 1j * root * complex(math.cos(-ang / 2), math.sin(-ang / 2))


def region_contains_z(region: RegionSpec, z: complex, which: str = "outer",
                      scale: float = 1.0) -> bool:
    """Membership of a spectral point in the scaled inner/outer sector."""
    bounds = region.outer if which == "outer" else region.inner
    rho, ang = side_polar(region.side, z)
    return bounds.contains(rho / scale, ang)


def k_in_side_sector(region: RegionSpec, k: complex, which: str = "outer",
                     scale: float = 1.0) -> bool:
    """Membership of a sheet point in the k-image of the scaled sector.

    The square-root branch maps the 'plus' side to the right half of the
    pointed disk and the 'minus' side to a neighbourhood of the positive
    imaginary axis; sheet points outside the branch image never belong.
    """
    k = complex(k)
    bounds = region.outer if which == "outer" else region.inner
    ang_k = math.atan2(k.imag, k.real)
    rho = abs(k) ** 2 / scale
    if region.side == PLUS:
        if not (-math.pi / 2 < ang_k < math.pi / 2):
            return False
        return bounds.contains(rho, 2.0 * ang_k)
    if not (0.0 < ang_k < math.pi):
        return False
    return bounds.contains(rho, math.pi - 2.0 * ang_k)


def real_interval(region: RegionSpec, which: str = "inner",
                  scale: float = 1.0) -> tuple[float, float]:
    """The (signed) real-axis interval cut out by the scaled sector."""
    bounds = region.inner if which == "inner" else region.outer
    if not (bounds.ang_min < 0.0 < bounds.ang_max):
        raise ValidationFailure(
            "the sector does not straddle the real axis; no real interval"
        )
    if region.side == PLUS:
        return (scale * bounds.rho_min, scale * bounds.rho_max)
    return (-scale * bounds.rho_max, -scale * bounds.rho_min)
