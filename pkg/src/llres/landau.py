"""Transverse machinery: projection kernels, the compressed weight operator,
its spectrum, and the small-eigenvalue counting laws.

The transverse basis is the angular-momentum eigenbasis of the constant-field
problem.  With ``u = b0*r**2/2`` the normalized radial profile of the mode
with radial index n and angular index l is

    Rad(n, |l|, u) = sqrt(n!/(n+|l|)!) * u**(|l|/2) * L_n^{(|l|)}(u) * exp(-u/2)

and the ground modes are (n=0, l<=0).  The level number of (n, l) is
``q = n + max(l, 0)`` with energy ``2*b0*q``.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .model import ProfileClass, QuadratureError, ValidationFailure


def lll_projection_kernel(b0: float, x, y) -> np.ndarray:
    """Ground-level projection kernel for a constant field.

    ``x`` and ``y`` broadcast with trailing dimension 2.  On the diagonal the
    kernel equals b0/(2*pi).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cross = x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0]
    d2 = np.sum((x - y) ** 2, axis=-1)
    return (b0 / (2.0 * np.pi)) * np.exp(0.5j * b0 * cross - 0.25 * b0 * d2)


def landau_level_kernel(b0: float, q: int, x, y) -> np.ndarray:
    """Projection kernel of the q-th transverse level (q = 0 is the ground one)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d2 = np.sum((x - y) ** 2, axis=-1)
    return lll_projection_kernel(b0, x, y) * eval_genlaguerre(q, 0, 0.5 * b0 * d2)


def radial_mode(n: int, abs_l: int, u) -> np.ndarray:
    """Normalized radial mode profile in the variable u = b0*r^2/2.

    Evaluated in log form so large angular indices neither overflow nor
    underflow before the Gaussian tail wins.
    """
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0.0
    logpref = 0.5 * (gammaln(n + 1) - gammaln(n + abs_l + 1))
    amp = np.exp(logpref + 0.5 * abs_l * np.log(u[pos]) - 0.5 * u[pos])
    out[pos] = amp * eval_genlaguerre(n, abs_l, u[pos])
    if abs_l == 0:
        out[~pos] = np.exp(logpref) * eval_genlaguerre(n, 0, u[~pos]) * np.exp(-0.5 * u[~pos])
    return out


# ---------------------------------------------------------------------------
# compressed weight operator
# ---------------------------------------------------------------------------


def _panel_rule(edges: np.ndarray, nodes_per_panel: int):
    base_x, base_w = np.polynomial.legendre.leggauss(nodes_per_panel)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
    weights = (half[:, None] * base_w[None, :]).ravel()
    return nodes, weights


def graded_u_edges(u_max: float, body_width: float = 2.5) -> np.ndarray:
    """Radial panel edges, refined near the origin.

    Smooth transverse weights can still be meromorphic with poles an O(1)
    distance below u = 0 (any rational decay profile is); small head panels
    keep the Gauss rule inside their convergence ellipse.
    """
    head = np.linspace(0.0, min(4.0, u_max), 9)
    body = np.arange(4.0, u_max, body_width)
    return np.unique(np.concatenate([head, body, [u_max]]))


def _diag_entry_rule(m: int, n_panels: int):
    """Quadrature for integrals against the normalized weight u^m e^-u / m!."""
    width = 10.0 * np.sqrt(m + 1.0)
    lo = max(0.0, m - width - 10.0)
    hi = m + width + 25.0
    edges = np.linspace(lo, hi, n_panels + 1)
    nodes, weights = _panel_rule(edges, 12)
    logw = m * np.log(nodes) - nodes - gammaln(m + 1)
    return nodes, weights * np.exp(logw)


def _radial_diag_entries(w_of_r, b0: float, m_count: int, rtol: float,
                         n_panels: int = 24, max_refine: int = 6) -> np.ndarray:
    entries = np.empty(m_count)
    for m in range(m_count):
        nodes, weights = _diag_entry_rule(m, n_panels)
        val = float(np.dot(weights, w_of_r(np.sqrt(2.0 * nodes / b0))))
        for _ in range(max_refine):
            nodes, weights = _diag_entry_rule(m, 2 * n_panels)
            ref = float(np.dot(weights, w_of_r(np.sqrt(2.0 * nodes / b0))))
            if abs(ref - val) <= rtol * max(abs(ref), 1e-300):
                val = ref
                break
            val = ref
            n_panels *= 2
        else:
            raise QuadratureError(f"diagonal weight entry m={m} did not converge",
                                  history=(val, ref))
        entries[m] = val
    return entries


def toeplitz_matrix(w, b0: float, basis_size: int, *, radial: bool = True,
                    rtol: float = 1e-10, n_theta: int = 32) -> np.ndarray:
    """Matrix of the compressed weight operator on the ground angular modes.

    ``w`` takes points of shape (..., 2) (or radii, when ``radial=True``) and
    returns nonnegative values.  For radial weights the matrix is diagonal.
    Quadrature refinement doubles until entries move by less than ``rtol``.
    """
    if basis_size <= 0:
        raise ValidationFailure("basis size must be positive")
    if radial:
        return np.diag(_radial_diag_entries(w, b0, basis_size, rtol)).astype(complex)

    # general weight: radial Gauss panels x angular trapezoid (FFT), doubled
    # in theta until the matrix settles.
    u_max = 2.0 * basis_size + 10.0 * np.sqrt(basis_size) + 30.0
    u, uw = _panel_rule(graded_u_edges(u_max), 10)
    rad = np.stack([radial_mode(0, m, u) for m in range(basis_size)])

    def build(n_th: int) -> np.ndarray:
        theta = 2.0 * np.pi * np.arange(n_th) / n_th
        r = np.sqrt(2.0 * u / b0)
        pts = np.stack([r[:, None] * np.cos(theta)[None, :],
                        r[:, None] * np.sin(theta)[None, :]], axis=-1)
        vals = np.asarray(w(pts), dtype=float)
        coeff = np.fft.fft(vals, axis=1) / n_th  # coeff[:, j] = (1/2pi) int w e^{-ij theta}
        mat = np.zeros((basis_size, basis_size), dtype=complex)
        for d in range(basis_size):
            # entry (m, m+d) picks the angular coefficient of order d
            prof = coeff[:, d % n_th]
            vec = np.einsum("mu,mu,u->m", rad[: basis_size - d],
                            rad[d:], prof * uw)
            idx = np.arange(basis_size - d)
            mat[idx, idx + d] = vec
            if d:
                mat[idx + d, idx] = np.conj(vec)
        return mat

    prev = build(n_theta)
    for _ in range(6):
        n_theta *= 2
        cur = build(n_theta)
        if np.abs(cur - prev).max() <= rtol * max(1.0, np.abs(cur).max()):
            return cur
        prev = cur
    raise QuadratureError("angular refinement of the weight matrix did not converge")


@dataclasses.dataclass(frozen=True)
class ToeplitzSpectrum:
    """Descending nonnegative spectrum of the compressed weight operator."""

    eigenvalues: np.ndarray
    basis_size: int
    b0: float

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=float)
        if eig.size and eig.min() < -1e-10:
            raise ValidationFailure(
                f"compressed weight operator must be positive; min eigenvalue {eig.min():.3e}"
            )
        eig = np.sort(np.clip(eig, 0.0, None))[::-1].copy()
        object.__setattr__(self, "eigenvalues", eig)


def toeplitz_spectrum(w, b0: float, basis_size: int, *, radial: bool = True,
                      rtol: float = 1e-10) -> ToeplitzSpectrum:
    mat = toeplitz_matrix(w, b0, basis_size, radial=radial, rtol=rtol)
    eig = np.linalg.eigvalsh(mat)
    return ToeplitzSpectrum(eigenvalues=eig, basis_size=basis_size, b0=b0)


def b_eigenvalues(spec: ToeplitzSpectrum) -> np.ndarray:
    """Eigenvalues of the singular-part operator: half the compressed weight's.

    This is the single place the factor of two between the compressed weight
    operator and the squared coupling operator is applied.
    """
    return 0.5 * spec.eigenvalues


def counting_function(spec: ToeplitzSpectrum, r: float) -> int:
    """Number of compressed-weight eigenvalues strictly above r (r > 0)."""
    if not r > 0:
        raise ValidationFailure("counting threshold must be positive")
    return int(np.count_nonzero(spec.eigenvalues > r))


def counting_b(spec: ToeplitzSpectrum, r: float) -> int:
    """Counting function of the squared coupling operator at threshold r."""
    if not r > 0:
        raise ValidationFailure("counting threshold must be positive")
    return int(np.count_nonzero(b_eigenvalues(spec) > r))


def phi(spec: ToeplitzSpectrum, lam: float) -> float:
    """Trace of arctan of the compressed weight scaled by 2*sqrt(lambda)."""
    if not lam > 0:
        raise ValidationFailure("phi is defined for positive energies")
    return float(np.arctan(spec.eigenvalues / (2.0 * np.sqrt(lam))).sum())


def sigma_p(spec: ToeplitzSpectrum, r: float, p: int) -> float:
    """Schatten-p weight of B/r damped by (1 + B^2/r^2)^(-1/2)."""
    if p not in (1, 2):
        raise ValidationFailure("p must be 1 or 2")
    if not r > 0:
        raise ValidationFailure("r must be positive")
    u = b_eigenvalues(spec) / r
    return float(np.sum(u ** p * (1.0 + u * u) ** (-p / 2.0)))


def n_tilde_p(spec: ToeplitzSpectrum, r: float, p: int) -> float:
    """Schatten-p weight of B/r restricted to the closed interval [0, r].

    An eigenvalue exactly at r contributes here and not to the counting
    function (closed/open boundary convention, applied literally).
    """
    if p not in (1, 2):
        raise ValidationFailure("p must be 1 or 2")
    if not r > 0:
        raise ValidationFailure("r must be positive")
    beta = b_eigenvalues(spec)
    kept = beta[beta <= r]
    return float(np.sum((kept / r) ** p))


# ---------------------------------------------------------------------------
# asymptotic fits of the counting function
# ---------------------------------------------------------------------------


def a1_prefactor(b0: float, m: float, u0=None, n_theta: int = 512) -> float:
    """Leading constant of the power-law counting asymptotics.

    For the default constant angular factor this is b0/2; otherwise it is the
    circle average of u0^(2/m) scaled by b0/2.
    """
    if u0 is None:
        return b0 / 2.0
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    vals = np.asarray(u0(theta), dtype=float) ** (2.0 / m)
    return b0 / (4.0 * np.pi) * float(vals.mean() * 2.0 * np.pi)


def expected_counting_model(profile: ProfileClass, b0: float, r: np.ndarray) -> np.ndarray:
    """Model counting curve for the declared decay regime."""
    r = np.asarray(r, dtype=float)
    if profile.kind == "A1":
        return a1_prefactor(b0, profile.m) * r ** (-2.0 / profile.m)
    if profile.kind == "A2":
        if np.any(r >= np.exp(-1.0)):
            raise ValidationFailure("stretched-Gaussian law needs r < exp(-1)")
        beta, mu = profile.beta, profile.mu
        if beta < 1.0:
            return 0.5 * b0 * mu ** (-1.0 / beta) * np.abs(np.log(r)) ** (1.0 / beta)
        if beta == 1.0:
            return np.abs(np.log(r)) / np.log1p(2.0 * mu / b0)
        return (beta / (beta - 1.0)) * np.abs(np.log(r)) / np.log(np.abs(np.log(r)))
    if profile.kind == "A3":
        if np.any(r >= np.exp(-1.0)):
            raise ValidationFailure("compact-support law needs r < exp(-1)")
        return np.abs(np.log(r)) / np.log(np.abs(np.log(r)))
    raise ValidationFailure(f"no counting law for profile class {profile.kind!r}")


@dataclasses.dataclass(frozen=True)
class CountingFit:
    law: str
    r_values: np.ndarray
    counts: np.ndarray
    exponent: float | None
    prefactor: float | None
    model_values: np.ndarray | None
    ratios: np.ndarray | None
    max_log_residual: float


def fit_counting_asymptotics(spec: ToeplitzSpectrum, profile: ProfileClass,
                             r_window) -> CountingFit:
    """Fit the small-threshold counting curve against the declared law.

    Power-law profiles get a log-log least-squares fit (exponent/prefactor);
    the other regimes are compared by ratio against the model curve.  The
    window must be truncation-stable: the smallest retained eigenvalue has to
    sit below the window so the counting steps are not an artifact of the
    basis cut.
    """
    r = np.sort(np.asarray(r_window, dtype=float))
    if r[0] <= 0:
        raise ValidationFailure("window thresholds must be positive")
    smallest = spec.eigenvalues[-1] if spec.eigenvalues.size else 0.0
    if smallest >= r[0]:
        raise ValidationFailure(
            f"window lower edge {r[0]:.3e} is not truncation-stable: smallest "
            f"retained eigenvalue is {smallest:.3e}; enlarge the basis"
        )
    counts = np.array([counting_function(spec, ri) for ri in r], dtype=float)
    if np.any(counts == 0):
        raise ValidationFailure("counting vanishes inside the window; shrink it")

    if profile.kind == "A1":
        slope, intercept = np.polyfit(np.log(r), np.log(counts), 1)
        fitted = np.exp(intercept) * r ** slope
        resid = float(np.abs(np.log(counts) - np.log(fitted)).max())
        return CountingFit(law="A1", r_values=r, counts=counts,
                           exponent=float(slope), prefactor=float(np.exp(intercept)),
                           model_values=fitted, ratios=None, max_log_residual=resid)

    model = expected_counting_model(profile, spec.b0, r)
    ratios = counts / model
    resid = float(np.abs(np.log(ratios)).max())
    return CountingFit(law=profile.kind, r_values=r, counts=counts,
                       exponent=None, prefactor=None, model_values=model,
                       ratios=ratios, max_log_residual=resid)
