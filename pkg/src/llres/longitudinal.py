"""One-dimensional objects along the field axis.

The free axis resolvent at spectral parameter z = k^2 has the kernel
``i*exp(i*k*|t-t'|)/(2*k)``; its value at k and the flattened kernel
``(1 - exp(i*k*|t-t'|))/(2*i*k)`` differ by the constant i/(2k), which is the
identity behind the singular/regular split used downstream.  Matrices built
here live in symmetrized quadrature coordinates: an operator with kernel
``kappa`` becomes ``sqrt(w_a) * kappa(t_a, t_b) * sqrt(w_b)``.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .model import QuadratureError, ValidationFailure, bracket

SERIES_SWITCH = 1e-4


class SingularInputError(ValueError):
    """The resolvent kernel was requested at the branch point k = 0."""


@dataclasses.dataclass(frozen=True)
class AxisGrid:
    """Composite Gauss-Legendre nodes on [-T, T], graded toward the origin."""

    nodes: np.ndarray
    weights: np.ndarray
    truncation: float
    gamma: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if np.any(weights <= 0):
            raise ValidationFailure("quadrature weights must be positive")
        if np.abs(nodes + nodes[::-1]).max() > 1e-12 * self.truncation:
            raise ValidationFailure("axis nodes must be symmetric about 0")

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)


def build_axis_grid(gamma: float, truncation: float | None = None,
                    n_panels_half: int = 5, nodes_per_panel: int = 8,
                    grading: float = 2.2, check_tol: float = 1e-5) -> AxisGrid:
    """Build a graded symmetric grid and self-check it on the decay weight.

    Panel edges follow a power grading so resolution concentrates where the
    exponential weight carries its mass.  The self-check integrates
    ``exp(-gamma*bracket(t))`` and compares against a doubled grid.
    """
    if truncation is None:
        truncation = max(10.0 / gamma, 20.0)

    def make(npanels: int, npp: int):
        edges_pos = truncation * np.linspace(0.0, 1.0, npanels + 1) ** grading
        edges = np.concatenate([-edges_pos[::-1][:-1], edges_pos])
        base_x, base_w = np.polynomial.legendre.leggauss(npp)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        nodes = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
        weights = (half[:, None] * base_w[None, :]).ravel()
        return nodes, weights

    nodes, weights = make(n_panels_half, nodes_per_panel)
    ref_nodes, ref_weights = make(2 * n_panels_half, nodes_per_panel + 2)
    val = float(np.dot(weights, np.exp(-gamma * bracket(nodes))))
    ref = float(np.dot(ref_weights, np.exp(-gamma * bracket(ref_nodes))))
    if abs(val - ref) > check_tol * max(abs(ref), 1e-30):
        raise QuadratureError(
            f"axis grid self-check failed: {val!r} vs refined {ref!r}",
            history=(val, ref),
        )
    return AxisGrid(nodes=nodes, weights=weights, truncation=truncation, gamma=gamma)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def resolvent_kernel_1d(k: complex, t, tp) -> np.ndarray:
    """Free axis resolvent kernel i*exp(i*k*|t-t'|)/(2k).

    For Im k > 0 this is the resolvent kernel at z = k^2; for Im k <= 0 it is
    the holomorphic continuation through the cut.  The caller is responsible
    for keeping Im k > -gamma/2 where weighted square-integrability is needed.
    """
    if k == 0:
        raise SingularInputError(
            "the axis resolvent kernel is singular at k = 0; use the split "
            "rank-one + flattened form instead"
        )
    d = np.abs(np.asarray(t, dtype=float) - np.asarray(tp, dtype=float))
    return 1j * np.exp(1j * k * d) / (2.0 * k)


def series_switch_threshold(k: complex, d: float) -> str:
    """Pick the evaluation mode of the flattened kernel at argument k*d."""
    return "series" if abs(k) * abs(d) < SERIES_SWITCH else "direct"


def _s_series(k: complex, d: np.ndarray) -> np.ndarray:
    # s = -(d/2) * sum_{m>=0} (i k d)^m / (m+1)!   truncated at machine precision
    x = 1j * k * d
    acc = np.ones_like(x)
    term = np.ones_like(x)
    fact = 1.0
    for m in range(1, 12):
        term = term * x
        fact *= (m + 1)
        acc = acc + term / fact
    return -0.5 * d * acc


def _s_series_dk(k: complex, d: np.ndarray) -> np.ndarray:
    # d/dk of the series: -(i d^2/2) * sum_{m>=1} m (i k d)^{m-1} / (m+1)!
    x = 1j * k * d
    acc = np.zeros_like(x)
    pw = np.ones_like(x)
    fact = 1.0
    for m in range(1, 12):
        fact *= (m + 1)
        acc = acc + m * pw / fact
        pw = pw * x
    return -0.5j * d * d * acc


def s_kernel(k: complex, t, tp) -> np.ndarray:
    """Flattened kernel (1 - exp(i*k*|t-t'|))/(2ik), holomorphic through k = 0.

    At k = 0 the removable singularity is filled with the limit -|t-t'|/2.
    Small |k*d| switches to a truncated series so the subtraction never
    cancels catastrophically.
    """
    d = np.abs(np.asarray(t, dtype=float) - np.asarray(tp, dtype=float))
    k = complex(k)
    if k == 0:
        return -0.5 * d + 0.0j
    out = np.empty(np.broadcast(d, d).shape, dtype=complex)
    d = np.broadcast_to(d, out.shape)
    small = np.abs(k) * d < SERIES_SWITCH
    out[small] = _s_series(k, d[small])
    out[~small] = (1.0 - np.exp(1j * k * d[~small])) / (2j * k)
    return out


def s_kernel_dk(k: complex, t, tp) -> np.ndarray:
    """Analytic k-derivative of the flattened kernel (same series switch)."""
    d = np.abs(np.asarray(t, dtype=float) - np.asarray(tp, dtype=float))
    k = complex(k)
    if k == 0:
        return -0.25j * d * d
    out = np.empty(np.broadcast(d, d).shape, dtype=complex)
    d = np.broadcast_to(d, out.shape)
    small = np.abs(k) * d < SERIES_SWITCH
    out[small] = _s_series_dk(k, d[small])
    dl = d[~small]
    s_direct = (1.0 - np.exp(1j * k * dl)) / (2j * k)
    out[~small] = -dl * np.exp(1j * k * dl) / (2.0 * k) - s_direct / k
    return out


def resolvent_kernel_dk(k: complex, t, tp) -> np.ndarray:
    """Analytic k-derivative of the free axis resolvent kernel."""
    if k == 0:
        raise SingularInputError("derivative of the resolvent kernel needs k != 0")
    d = np.abs(np.asarray(t, dtype=float) - np.asarray(tp, dtype=float))
    e = np.exp(1j * k * d)
    return -d * e / (2.0 * k) - 1j * e / (2.0 * k * k)


# ---------------------------------------------------------------------------
# rank-one coupling
# ---------------------------------------------------------------------------


def decay_vector(grid: AxisGrid) -> np.ndarray:
    """Values of the coupling weight exp(-gamma/2 * bracket(t)) at the nodes."""
    return np.exp(-0.5 * grid.gamma * bracket(grid.nodes))


def rank_one_a(grid: AxisGrid, u: np.ndarray) -> np.ndarray:
    """Apply the rank-one operator (i/2) <u, e> e to node values of u."""
    e = decay_vector(grid)
    inner = np.dot(grid.weights * np.asarray(u), e)
    return 0.5j * inner * e


def rank_one_matrix(grid: AxisGrid) -> np.ndarray:
    """Matrix of the rank-one operator in symmetrized coordinates."""
    v = grid.sqrt_weights * decay_vector(grid)
    return 0.5j * np.outer(v, v)


def coupling_functional(grid: AxisGrid) -> np.ndarray:
    """Row vector of the coupling functional u -> <u, e> in symmetrized coords."""
    return grid.sqrt_weights * decay_vector(grid)


# ---------------------------------------------------------------------------
# matrices in symmetrized coordinates
# ---------------------------------------------------------------------------


def axis_kernel_matrix(grid: AxisGrid, k: complex, kind: str = "resolvent") -> np.ndarray:
    """Symmetrized matrix of an axis kernel ('resolvent', 's', or their _dk)."""
    t = grid.nodes
    tt, tp = np.meshgrid(t, t, indexing="ij")
    if kind == "resolvent":
        ker = resolvent_kernel_1d(k, tt, tp)
    elif kind == "s":
        ker = s_kernel(k, tt, tp)
    elif kind == "resolvent_dk":
        ker = resolvent_kernel_dk(k, tt, tp)
    elif kind == "s_dk":
        ker = s_kernel_dk(k, tt, tp)
    else:
        raise ValidationFailure(f"unknown kernel kind {kind!r}")
    sw = grid.sqrt_weights
    return sw[:, None] * ker * sw[None, :]


def weighted_resolvent_matrix(grid: AxisGrid, k: complex) -> np.ndarray:
    """Symmetrized matrix of the decay-weighted resolvent e_- R(k^2) e_-."""
    e = decay_vector(grid)
    return e[:, None] * axis_kernel_matrix(grid, k, "resolvent") * e[None, :]


def weighted_s_matrix(grid: AxisGrid, k: complex) -> np.ndarray:
    """Symmetrized matrix of the decay-weighted flattened kernel e_- s(k) e_-."""
    e = decay_vector(grid)
    return e[:, None] * axis_kernel_matrix(grid, k, "s") * e[None, :]
