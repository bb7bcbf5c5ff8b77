"""Weighted-resolvent assembly and regularized determinants.

Discretization: the transverse plane is expanded in the constant-field
level/angular eigenbasis (:mod:`llres.landau`), the axis in symmetrized
Gauss-Legendre nodes (:mod:`llres.longitudinal`), and spin is kept explicit.
A flattened index runs as ``(mode, spin) x axis_node`` with the axis index
fastest.  In this representation the free Hamiltonian is block diagonal over
(mode, spin) with one axis-resolvent matrix per level energy, multiplication
by the potential is dense over (mode, spin) and diagonal over axis nodes, and
the singular/regular split of the weighted resolvent

    T(k) = (i/k) * (signed coupling)  +  regular(k)

is an exact matrix identity because the underlying kernel identity
``resolvent = i/(2k) + flattened`` holds entrywise.

For radial separable potentials every piece is block diagonal over the
angular index, and determinant evaluations factorize accordingly.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from . import landau, longitudinal
from .model import (MagneticModel, PotentialSpec, ValidationFailure,
                    matrix_abs_sqrt, matrix_signed_sqrt, require_assemblable,
                    sign_value, PLUS, MINUS)


class DomainError(ValueError):
    """A sheet coordinate or spectral point left the validated domain."""


# ---------------------------------------------------------------------------
# mode basis and grids
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ModeBasis:
    """Transverse (level, angular) index set, sorted by (angular, level)."""

    b0: float
    levels: np.ndarray
    angulars: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=int)
        an = np.asarray(self.angulars, dtype=int)
        order = np.lexsort((lv, an))
        object.__setattr__(self, "levels", lv[order])
        object.__setattr__(self, "angulars", an[order])
        n = lv - np.clip(an, 0, None)
        if np.any(n[order] < 0):
            raise ValidationFailure("radial index n = q - max(l,0) must be nonnegative")

    @property
    def n_modes(self) -> int:
        return self.levels.size

    @property
    def radial_indices(self) -> np.ndarray:
        return self.levels - np.clip(self.angulars, 0, None)

    @property
    def ground_mask(self) -> np.ndarray:
        return self.levels == 0


def make_mode_basis(b0: float, n_lll: int = 16, q_max: int = 4,
                    ell_max: int = 1) -> ModeBasis:
    """Angular range [-(n_lll-1), min(ell_max, q_max)], levels up to q_max."""
    if n_lll < 1 or q_max < 0:
        raise ValidationFailure("need at least one ground mode and q_max >= 0")
    ells, qs = [], []
    for ell in range(-(n_lll - 1), min(ell_max, q_max) + 1):
        for q in range(max(ell, 0), q_max + 1):
            ells.append(ell)
            qs.append(q)
    return ModeBasis(b0=b0, levels=np.array(qs), angulars=np.array(ells))


@dataclasses.dataclass(frozen=True)
class Grids:
    """Everything fixed about a discretization: basis, axis rule, radial rule."""

    model: MagneticModel
    modes: ModeBasis
    axis: longitudinal.AxisGrid
    q_max: int
    u_nodes: np.ndarray
    u_weights: np.ndarray
    rad_values: np.ndarray  # (n_modes, n_u) radial mode profiles

    @property
    def n_modes(self) -> int:
        return self.modes.n_modes


def make_grids(model: MagneticModel, n_lll: int = 16, q_max: int = 4,
               ell_max: int = 1, axis_panels: int = 4, axis_nodes: int = 8,
               truncation: float | None = None, u_nodes_per_panel: int = 10,
               u_panel_width: float = 2.5, u_pad: float = 40.0) -> Grids:
    basis = make_mode_basis(model.b0, n_lll=n_lll, q_max=q_max, ell_max=ell_max)
    axis = longitudinal.build_axis_grid(model.gamma, truncation=truncation,
                                        n_panels_half=axis_panels,
                                        nodes_per_panel=axis_nodes)
    max_abs_ell = int(np.abs(basis.angulars).max()) if basis.n_modes else 0
    u_max = 4.0 * q_max + 2.0 * max_abs_ell + u_pad
    base_x, base_w = np.polynomial.legendre.leggauss(u_nodes_per_panel)
    edges = landau.graded_u_edges(u_max, body_width=u_panel_width)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    u = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
    uw = (half[:, None] * base_w[None, :]).ravel()
    rad = np.stack([
        landau.radial_mode(int(n), int(abs(l)), u)
        for n, l in zip(basis.radial_indices, basis.angulars)
    ])
    return Grids(model=model, modes=basis, axis=axis, q_max=q_max,
                 u_nodes=u, u_weights=uw, rad_values=rad)


def transverse_mode_matrix(grids: Grids, f_radial) -> np.ndarray:
    """Matrix of multiplication by a radial function in the mode basis.

    Angular orthogonality makes this block diagonal over the angular index.
    """
    r = np.sqrt(2.0 * grids.u_nodes / grids.model.b0)
    fv = np.asarray(f_radial(r), dtype=float)
    mat = np.einsum("iu,ju,u->ij", grids.rad_values, grids.rad_values,
                    fv * grids.u_weights, optimize=True)
    same_ell = grids.modes.angulars[:, None] == grids.modes.angulars[None, :]
    return np.where(same_ell, mat, 0.0).astype(complex)


# ---------------------------------------------------------------------------
# discretized potential factors
# ---------------------------------------------------------------------------


class DiscretizedPotential:
    """Mode-basis matrices of |V|^(1/2) and of the signed root J|V|^(1/2),
    one per axis node, with the coupling-weight variants precomputed.
    """

    def __init__(self, spec: PotentialSpec, model: MagneticModel, grids: Grids,
                 n_theta: int | None = None):
        require_assemblable(spec, model)
        if grids.model.b0 != model.b0 or grids.model.gamma != model.gamma:
            raise ValidationFailure("grids were built for a different model")
        self.spec = spec
        self.model = model
        self.grids = grids
        self.ns = spec.spin_dim
        basis = grids.modes
        n_t = grids.axis.size
        d = basis.n_modes * self.ns

        if spec.separable is not None:
            sep = spec.separable
            m_spin = sep.spin_matrix
            if m_spin.shape != (self.ns, self.ns):
                raise ValidationFailure("spin matrix shape disagrees with scalar_mode")
            w_vals = lambda r: np.sqrt(np.clip(sep.transverse_profile(r), 0.0, None))
            f_w = transverse_mode_matrix(grids, w_vals)
            g = np.clip(np.asarray(sep.axis_profile(grids.axis.nodes), dtype=float), 0.0, None)
            sqrt_g = np.sqrt(g)
            spin_r = matrix_abs_sqrt(m_spin)
            spin_l = matrix_signed_sqrt(m_spin)
            self.right = sqrt_g[:, None, None] * np.kron(f_w, spin_r)[None, :, :]
            self.left = sqrt_g[:, None, None] * np.kron(f_w, spin_l)[None, :, :]
            self.block_diagonal = True
            self.spin_diagonal = bool(
                np.abs(m_spin - np.diag(np.diag(m_spin))).max() < 1e-14)
        else:
            self.right, self.left = self._sample_general(n_theta)
            self.block_diagonal = False
            self.spin_diagonal = False

        self.n_t = n_t
        self.dim = d

        levels = np.repeat(basis.levels, self.ns)
        spins = np.tile(np.arange(self.ns), basis.n_modes)
        self.flat_levels = levels
        self.flat_spins = spins
        self.flat_energies = np.where(
            spins == 0, 2.0 * model.b0 * levels, 2.0 * model.b0 * (levels + 1.0)
        )
        self.ground_up_flats = np.flatnonzero((levels == 0) & (spins == 0))

    def _sample_general(self, n_theta):
        grids, spec = self.grids, self.spec
        basis = grids.modes
        ells = basis.angulars
        span = int(ells.max() - ells.min())
        if n_theta is None:
            n_theta = 1
            while n_theta < 4 * span + 16:
                n_theta *= 2
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        r = np.sqrt(2.0 * grids.u_nodes / grids.model.b0)
        pts = np.stack([r[:, None] * np.cos(theta)[None, :],
                        r[:, None] * np.sin(theta)[None, :]], axis=-1)
        n_u = r.size
        delta = (ells[:, None] - ells[None, :]) % n_theta
        radw = grids.rad_values * grids.u_weights[None, :]
        ns = self.ns
        d = basis.n_modes * ns
        right = np.empty((grids.axis.size, d, d), dtype=complex)
        left = np.empty_like(right)
        for a, t in enumerate(grids.axis.nodes):
            v = spec.sample(pts, np.full((n_u, n_theta), t))
            r_half = matrix_abs_sqrt(v)
            l_half = matrix_signed_sqrt(v)
            for target, vals in ((right, r_half), (left, l_half)):
                coeff = np.fft.fft(vals, axis=1) / n_theta  # (n_u, n_theta, s, s)
                gathered = coeff[:, delta, :, :]  # (n_u, M, M, s, s)
                mat = np.einsum("iu,ju,uijst->isjt", radw, grids.rad_values,
                                gathered, optimize=True)
                target[a] = mat.reshape(d, d)
        return right, left


# ---------------------------------------------------------------------------
# regularized determinants
# ---------------------------------------------------------------------------


def log_det2(mat: np.ndarray) -> complex:
    """Complex logarithm of the 2-regularized determinant of I + mat.

    The imaginary part is reduced modulo 2*pi per factor; continuous branches
    are the caller's business (path unwrapping).
    """
    mat = np.asarray(mat, dtype=complex)
    sign, logabs = np.linalg.slogdet(np.eye(mat.shape[0]) + mat)
    if sign == 0:
        return complex(-np.inf, 0.0)
    tr = np.trace(mat)
    return complex(logabs - tr.real, np.angle(sign) - tr.imag)


def det2(mat: np.ndarray, method: str = "auto") -> complex:
    """2-regularized determinant of I + mat.

    The LU route evaluates det(I+mat)*exp(-tr mat); the eigenvalue route
    multiplies the factors (1+mu)exp(-mu).  'auto' prefers LU and falls back
    to eigenvalues when the matrix is large in norm or the LU result is not
    finite (the singular part grows like 1/|k| near the origin, where LU
    pivoting loses accuracy first).
    """
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationFailure("det2 needs a square matrix")
    if method not in ("auto", "det", "eig"):
        raise ValidationFailure(f"unknown det2 method {method!r}")
    use_eig = method == "eig"
    if method == "auto" and np.linalg.norm(mat) > 1e3:
        use_eig = True
    if not use_eig:
        val = log_det2(mat)
        if np.isfinite(val.real) or val.real == -np.inf:
            if val.real == -np.inf:
                return 0.0 + 0.0j
            return complex(np.exp(val.real) * np.cos(val.imag),
                           np.exp(val.real) * np.sin(val.imag))
        use_eig = True
    mu = np.linalg.eigvals(mat)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(1.0 + mu) - mu
    if np.any(np.isneginf(logs.real)):
        return 0.0 + 0.0j
    total = logs.sum()
    return complex(np.exp(total.real) * np.cos(total.imag),
                   np.exp(total.real) * np.sin(total.imag))


# ---------------------------------------------------------------------------
# assembled operator families
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class BSMatrix:
    """A dense assembled weighted resolvent at one sheet point.

    ``matrix == singular_part + regular_part`` holds to rounding because the
    split is an exact identity of the discretization.  ``b_matrix`` is the
    hermitian positive factor of the singular part; for definite-sign
    potentials ``singular_part == (i*J/k) * b_matrix`` literally, for
    pointwise signs the sign operator multiplies from the left.
    """

    k: complex
    matrix: np.ndarray
    singular_part: np.ndarray
    regular_part: np.ndarray
    landau_cutoff: int
    hs_norm: float
    b_matrix: np.ndarray
    tail_bound: float


def _branch_sqrt(zz: complex) -> complex:
    """Square root with nonnegative imaginary part (resolvent branch)."""
    root = complex(np.sqrt(complex(zz)))
    if root.imag < 0:
        root = -root
    return root


class PauliFamily:
    """Cached evaluator for the weighted resolvent of one potential.

    Provides dense assembly, per-angular-block determinant evaluation,
    analytic derivatives, and traces.  All methods are pure in ``k``.
    """

    def __init__(self, spec: PotentialSpec, model: MagneticModel, grids: Grids,
                 k_min_frac: float = 1e-3, im_margin_frac: float = 0.02):
        self.spec = spec
        self.model = model
        self.grids = grids
        self.disc = DiscretizedPotential(spec, model, grids)
        self.q_max = grids.q_max
        self.k_min = k_min_frac * model.n_gamma_zeta
        self.k_max = (1.0 - 1e-9) * model.n_gamma_zeta
        self.im_floor = -0.5 * model.gamma + im_margin_frac * model.gamma
        self.n_t = grids.axis.size
        self.dim = self.disc.dim * self.n_t

        # the coupling row reduces to plain axis integration: the explicit
        # exponential weights in its definition cancel against each other
        sw = grids.axis.sqrt_weights
        g_flats = self.disc.ground_up_flats
        k_arr = self.disc.right[:, g_flats, :] * sw[:, None, None]
        kl_arr = self.disc.left[:, g_flats, :] * sw[:, None, None]
        n_rows = g_flats.size
        self._K = (k_arr.transpose(1, 2, 0) / math.sqrt(2.0)).reshape(n_rows, self.dim)
        self._KL = (kl_arr.transpose(1, 2, 0) / math.sqrt(2.0)).reshape(n_rows, self.dim)
        self.signed_trace = complex(np.vdot(self._KL, self._K))
        vanishing = float(np.abs(self.disc.right).max(initial=0.0)) == 0.0
        self.imaginary_axis_selfadjoint = spec.sign in (PLUS, MINUS) or vanishing

        if self.disc.block_diagonal:
            ells = np.repeat(grids.modes.angulars, self.disc.ns)
            spins = self.disc.flat_spins
            groups = []
            for ell in np.unique(ells):
                if self.disc.spin_diagonal and self.disc.ns == 2:
                    for sp in (0, 1):
                        flats = np.flatnonzero((ells == ell) & (spins == sp))
                        if flats.size:
                            groups.append(flats)
                else:
                    groups.append(np.flatnonzero(ells == ell))
            self._det_blocks = groups
        else:
            self._det_blocks = [np.arange(self.disc.dim)]
        self._block_cache: dict[tuple[int, ...], dict] = {}

    @property
    def b_matrix(self) -> np.ndarray:
        """Dense squared coupling operator (size: full discretization)."""
        return self._K.conj().T @ self._K

    def coupling_gram(self) -> np.ndarray:
        """Small Gram matrix of the coupling map; shares its nonzero spectrum
        with the squared coupling operator."""
        return self._K @ self._K.conj().T

    # -- bookkeeping -------------------------------------------------------

    def _require_k(self, k: complex) -> None:
        k = complex(k)
        if not (self.k_min <= abs(k) <= self.k_max):
            raise DomainError(
                f"|k| = {abs(k):.4g} outside the validated pointed disk "
                f"[{self.k_min:.4g}, {self.k_max:.4g}]"
            )
        if k.imag <= self.im_floor:
            raise DomainError(
                f"Im k = {k.imag:.4g} at or below the weighted-space floor {self.im_floor:.4g}"
            )

    def _block(self, flats: np.ndarray) -> dict:
        key = (int(flats[0]), int(flats[-1]), len(flats))
        data = self._block_cache.get(key)
        if data is not None:
            return data
        n_t = self.n_t
        cols = (flats[:, None] * n_t + np.arange(n_t)[None, :]).ravel()
        disc = self.disc
        p_local = np.flatnonzero(np.isin(flats, disc.ground_up_flats))
        energies = disc.flat_energies[flats]
        spins = disc.flat_spins[flats]
        levels = disc.flat_levels[flats]
        q_sel = ~((spins == 0) & (levels == 0))
        q_groups: dict[float, np.ndarray] = {}
        for e in np.unique(energies[q_sel]):
            q_groups[float(e)] = np.flatnonzero(q_sel & (energies == e))
        data = {
            "flats": flats,
            "cols": cols,
            "left": disc.left[:, flats][:, :, flats],
            "right": disc.right[:, flats][:, :, flats],
            "p_local": p_local,
            "q_groups": q_groups,
            "K": self._K[:, cols],
            "KL": self._KL[:, cols],
            "all_energy_groups": {  # for direct assembly, ground level included
                float(e): np.flatnonzero(energies == e) for e in np.unique(energies)
            },
        }
        self._block_cache[key] = data
        return data

    @staticmethod
    def _sandwich(left: np.ndarray, right: np.ndarray,
                  terms: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        n_t, d, _ = left.shape
        out = np.zeros((d, n_t, d, n_t), dtype=complex)
        for mat, cols in terms:
            if cols.size == 0:
                continue
            out += np.einsum("aig,ab,bgj->iajb", left[:, :, cols], mat,
                             right[:, cols, :], optimize=True)
        return out.reshape(d * n_t, d * n_t)

    def _axis_q_matrices(self, z: complex, energies, deriv: bool, q_max: int):
        # one evaluation point serves every angular block; memoize the last
        key = (complex(z), bool(deriv), int(q_max))
        memo = getattr(self, "_axis_memo", None)
        if memo is not None and memo[0] == key:
            mats = memo[1]
        else:
            mats = {}
            for e in np.unique(self.disc.flat_energies):
                level = e / (2.0 * self.model.b0)
                if level > q_max + 1 + 1e-9:
                    continue
                kappa = _branch_sqrt(z - e)
                mat = longitudinal.axis_kernel_matrix(self.grids.axis, kappa, "resolvent")
                if deriv:
                    dmat = longitudinal.axis_kernel_matrix(self.grids.axis, kappa,
                                                           "resolvent_dk")
                    mats[e] = (mat, dmat / (2.0 * kappa))  # d/dz
                else:
                    mats[e] = (mat, None)
            self._axis_memo = (key, mats)
        return {e: mats[e] for e in energies if e in mats}

    # -- assembly ----------------------------------------------------------

    def _t_block(self, blk: dict, k: complex, need_dk: bool = False,
                 q_max: int | None = None):
        k = complex(k)
        z = k * k
        q_max = self.q_max if q_max is None else q_max
        sing = (1j / k) * (blk["KL"].conj().T @ blk["K"])

        s_mat = longitudinal.axis_kernel_matrix(self.grids.axis, k, "s")
        q_axis = self._axis_q_matrices(z, blk["q_groups"].keys(), need_dk, q_max)
        reg = self._sandwich(blk["left"], blk["right"],
                             [(s_mat, blk["p_local"])]
                             + [(q_axis[e][0], loc) for e, loc in blk["q_groups"].items()
                                if e in q_axis])
        t_mat = sing + reg
        if not need_dk:
            return t_mat, None

        d_sing = -(1j / (k * k)) * (blk["KL"].conj().T @ blk["K"])
        ds_mat = longitudinal.axis_kernel_matrix(self.grids.axis, k, "s_dk")
        d_reg = self._sandwich(blk["left"], blk["right"],
                               [(ds_mat, blk["p_local"])]
                               + [(q_axis[e][1] * (2.0 * k), loc)
                                  for e, loc in blk["q_groups"].items() if e in q_axis])
        return t_mat, d_sing + d_reg

    def t_matrix(self, k: complex, q_max: int | None = None) -> np.ndarray:
        """Dense weighted resolvent via the singular/regular split."""
        self._require_k(k)
        return self._assemble_full(k, need_dk=False, q_max=q_max)[0]

    def _assemble_full(self, k, need_dk, q_max=None):
        n = self.dim
        t_full = np.zeros((n, n), dtype=complex)
        d_full = np.zeros((n, n), dtype=complex) if need_dk else None
        for flats in self._det_blocks:
            blk = self._block(flats)
            t_b, d_b = self._t_block(blk, k, need_dk=need_dk, q_max=q_max)
            ix = np.ix_(blk["cols"], blk["cols"])
            t_full[ix] = t_b
            if need_dk:
                d_full[ix] = d_b
        return t_full, d_full

    def t_matrix_direct(self, k: complex) -> np.ndarray:
        """Unsplit assembly through the full level sum; physical sheet only."""
        self._require_k(k)
        k = complex(k)
        z = k * k
        if z.imag <= 0:
            raise DomainError("direct assembly is defined on the physical sheet Im(k^2) > 0")
        n = self.dim
        out = np.zeros((n, n), dtype=complex)
        for flats in self._det_blocks:
            blk = self._block(flats)
            terms = []
            for e, loc in blk["all_energy_groups"].items():
                kappa = _branch_sqrt(z - e)
                terms.append((longitudinal.axis_kernel_matrix(self.grids.axis, kappa,
                                                              "resolvent"), loc))
            t_b = self._sandwich(blk["left"], blk["right"], terms)
            out[np.ix_(blk["cols"], blk["cols"])] = t_b
        return out

    # -- determinant interface ---------------------------------------------

    def logdet2(self, k: complex) -> complex:
        self._require_k(k)
        total = 0.0 + 0.0j
        for flats in self._det_blocks:
            blk = self._block(flats)
            t_b, _ = self._t_block(blk, k)
            total += log_det2(t_b)
        return total

    def dlogdet2_dk(self, k: complex) -> complex:
        self._require_k(k)
        total = 0.0 + 0.0j
        for flats in self._det_blocks:
            blk = self._block(flats)
            t_b, d_b = self._t_block(blk, k, need_dk=True)
            eye = np.eye(t_b.shape[0])
            total += np.trace(np.linalg.solve(eye + t_b, d_b)) - np.trace(d_b)
        return complex(total)

    def trace_dz(self, k: complex) -> complex:
        """Trace of the z-derivative of the assembled weighted resolvent."""
        self._require_k(k)
        k = complex(k)
        total = 0.0 + 0.0j
        for flats in self._det_blocks:
            blk = self._block(flats)
            _, d_b = self._t_block(blk, k, need_dk=True)
            total += np.trace(d_b)
        return complex(total / (2.0 * k))

    def resolved_trace(self, k: complex) -> complex:
        """Trace of (I+T)^(-1) dT/dz, the logarithmic z-derivative kernel."""
        self._require_k(k)
        k = complex(k)
        total = 0.0 + 0.0j
        for flats in self._det_blocks:
            blk = self._block(flats)
            t_b, d_b = self._t_block(blk, k, need_dk=True)
            eye = np.eye(t_b.shape[0])
            total += np.trace(np.linalg.solve(eye + t_b, d_b))
        return complex(total / (2.0 * k))

    def count_eigs_below_per_block(self, k: complex, threshold: float = -1.0,
                                   herm_tol: float = 1e-8,
                                   blocks=None) -> list[int]:
        """Per-block eigenvalue counts below a real threshold (self-adjoint point)."""
        self._require_k(k)
        counts = []
        indices = range(len(self._det_blocks)) if blocks is None else blocks
        for bi in indices:
            blk = self._block(self._det_blocks[bi])
            t_b, _ = self._t_block(blk, k)
            skew = np.abs(t_b - t_b.conj().T).max()
            if skew > herm_tol * max(1.0, np.abs(t_b).max()):
                raise DomainError(
                    f"operator is not self-adjoint at k={k} (skew {skew:.2e}); "
                    "eigenvalue counting is only meaningful on the negative axis"
                )
            eigs = np.linalg.eigvalsh(0.5 * (t_b + t_b.conj().T))
            counts.append(int(np.count_nonzero(eigs < threshold)))
        return counts

    def count_eigs_below(self, k: complex, threshold: float = -1.0,
                         herm_tol: float = 1e-8) -> int:
        """Number of eigenvalues below a real threshold at a self-adjoint point."""
        return sum(self.count_eigs_below_per_block(k, threshold, herm_tol))


def _tail_bound(spec: PotentialSpec, model: MagneticModel, z: complex,
                q_max: int) -> float:
    gap_edge = 2.0 * model.b0 * (q_max + 1)
    dist = gap_edge - complex(z).real
    if dist <= 0:
        dist = abs(complex(z).imag)
    if dist <= 0:
        raise DomainError("spectral point touches the truncated continuum edge")
    return 2.0 * spec.envelope_const / dist


def build_coupling_matrix(spec: PotentialSpec, model: MagneticModel,
                          grids: Grids) -> np.ndarray:
    """The coupling map onto the ground transverse modes (rows)."""
    fam = PauliFamily(spec, model, grids)
    return fam._K


def build_B(spec: PotentialSpec, model: MagneticModel, grids: Grids) -> np.ndarray:
    """Hermitian positive factor of the singular part (squared coupling)."""
    return PauliFamily(spec, model, grids).b_matrix


def build_Q_resolvent_block(spec: PotentialSpec, model: MagneticModel,
                            grids: Grids, z: complex, q_max: int | None = None,
                            margin_frac: float = 1e-3) -> tuple[np.ndarray, float]:
    """Weighted block of the resolvent restricted off the ground level.

    Returns the assembled matrix together with the reported truncation tail
    bound.  Spectral points within the margin of the continuum are rejected.
    """
    z = complex(z)
    if q_max is None:
        q_max = grids.q_max
    if q_max < 1:
        raise ValidationFailure("level cutoff must be at least 1")
    if z.real >= model.zeta - margin_frac * model.zeta and abs(z.imag) <= margin_frac * model.zeta:
        raise DomainError(
            f"z = {z:.4g} is within the margin of the continuum [{model.zeta:.4g}, inf)"
        )
    fam = PauliFamily(spec, model, grids)
    n = fam.dim
    out = np.zeros((n, n), dtype=complex)
    for flats in fam._det_blocks:
        blk = fam._block(flats)
        q_axis = fam._axis_q_matrices(z, blk["q_groups"].keys(), False, q_max)
        t_b = fam._sandwich(
            blk["right"], blk["right"],
            [(q_axis[e][0], loc) for e, loc in blk["q_groups"].items() if e in q_axis],
        )
        out[np.ix_(blk["cols"], blk["cols"])] = t_b
    return out, _tail_bound(spec, model, z, q_max)


def assemble_T(k: complex, spec: PotentialSpec, model: MagneticModel,
               grids: Grids, q_max: int | None = None) -> BSMatrix:
    """Assemble the split weighted resolvent at a sheet point.

    See :class:`PauliFamily` for the cached evaluator used by scans; this
    convenience entry point builds the dense record the one time it is asked.
    """
    fam = PauliFamily(spec, model, grids)
    fam._require_k(k)
    k = complex(k)
    q_max = fam.q_max if q_max is None else q_max
    n = fam.dim
    sing = np.zeros((n, n), dtype=complex)
    reg = np.zeros((n, n), dtype=complex)
    for flats in fam._det_blocks:
        blk = fam._block(flats)
        ix = np.ix_(blk["cols"], blk["cols"])
        sing[ix] = (1j / k) * (blk["KL"].conj().T @ blk["K"])
        s_mat = longitudinal.axis_kernel_matrix(grids.axis, k, "s")
        q_axis = fam._axis_q_matrices(k * k, blk["q_groups"].keys(), False, q_max)
        r_b = fam._sandwich(blk["left"], blk["right"],
                            [(s_mat, blk["p_local"])]
                            + [(q_axis[e][0], loc) for e, loc in blk["q_groups"].items()
                               if e in q_axis])
        reg[ix] = r_b
    mat = sing + reg
    return BSMatrix(k=k, matrix=mat, singular_part=sing, regular_part=reg,
                    landau_cutoff=q_max, hs_norm=float(np.linalg.norm(mat)),
                    b_matrix=fam.b_matrix,
                    tail_bound=_tail_bound(spec, model, k * k, q_max))


def trace_dz_T(k: complex, spec: PotentialSpec, model: MagneticModel,
               grids: Grids) -> complex:
    """Trace of the z-derivative of the weighted resolvent at z = k^2."""
    return PauliFamily(spec, model, grids).trace_dz(k)


def dump_matrix(path: str, mat: np.ndarray) -> None:
    """Debug dump: uint64 (rows, cols) header then row-major re/im float64 pairs,
    all little-endian."""
    mat = np.ascontiguousarray(np.asarray(mat, dtype=complex))
    with open(path, "wb") as fh:
        fh.write(np.array(mat.shape, dtype="<u8").tobytes())
        interleaved = np.empty(mat.size * 2, dtype="<f8")
        interleaved[0::2] = mat.real.ravel()
        interleaved[1::2] = mat.imag.ravel()
        fh.write(interleaved.tobytes())


def load_matrix(path: str) -> np.ndarray:
    """Inverse of :func:`dump_matrix`."""
    with open(path, "rb") as fh:
        shape = np.frombuffer(fh.read(16), dtype="<u8")
        rows, cols = int(shape[0]), int(shape[1])
        data = np.frombuffer(fh.read(), dtype="<f8")
    return (data[0::2] + 1j * data[1::2]).reshape(rows, cols)


# ---------------------------------------------------------------------------
# synthetic families (oracle harness)
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class SyntheticModel:
    """Prescribed singular spectrum plus a polynomial regular part.

    ``a_coeffs`` are matrix coefficients of the regular part as a polynomial
    in k (constant first); an empty tuple means the regular part vanishes.
    """

    b_diag: np.ndarray
    a_coeffs: tuple[np.ndarray, ...]
    j_sign: str = PLUS

    def __post_init__(self):
        b = np.asarray(self.b_diag, dtype=float)
        if np.any(b < 0):
            raise ValidationFailure("prescribed singular eigenvalues must be nonnegative")
        object.__setattr__(self, "b_diag", b)
        coeffs = tuple(np.asarray(a, dtype=complex) for a in self.a_coeffs)
        for a in coeffs:
            if a.shape != (b.size, b.size):
                raise ValidationFailure("regular-part coefficients must match b_diag size")
        object.__setattr__(self, "a_coeffs", coeffs)

    def regular_at(self, k: complex) -> np.ndarray:
        out = np.zeros((self.b_diag.size, self.b_diag.size), dtype=complex)
        for j, a in enumerate(self.a_coeffs):
            out += a * (k ** j)
        return out

    def regular_dk(self, k: complex) -> np.ndarray:
        out = np.zeros((self.b_diag.size, self.b_diag.size), dtype=complex)
        for j, a in enumerate(self.a_coeffs):
            if j:
                out += j * a * (k ** (j - 1))
        return out


def assemble_synthetic(model: SyntheticModel, k: complex) -> BSMatrix:
    if k == 0:
        raise DomainError("synthetic assembly needs k != 0")
    j = sign_value(model.j_sign)
    sing = (1j * j / k) * np.diag(model.b_diag).astype(complex)
    reg = model.regular_at(k)
    mat = sing + reg
    return BSMatrix(k=complex(k), matrix=mat, singular_part=sing, regular_part=reg,
                    landau_cutoff=0, hs_norm=float(np.linalg.norm(mat)),
                    b_matrix=np.diag(model.b_diag).astype(complex), tail_bound=0.0)


class SyntheticFamily:
    """Evaluator over a synthetic model, same interface as PauliFamily."""

    def __init__(self, model: SyntheticModel, k_min: float = 0.0,
                 imaginary_axis_selfadjoint: bool | None = None):
        self.model = model
        self.k_min = k_min
        self.signed_trace = complex(sign_value(model.j_sign) * model.b_diag.sum())
        if imaginary_axis_selfadjoint is None:
            imaginary_axis_selfadjoint = all(
                np.allclose(a, a.conj().T, atol=1e-13) and np.allclose(a.imag, 0.0)
                for a in model.a_coeffs
            )
        self.imaginary_axis_selfadjoint = imaginary_axis_selfadjoint

    def _require_k(self, k):
        if abs(complex(k)) <= self.k_min:
            raise DomainError(f"|k| <= {self.k_min} excluded")

    def t_matrix(self, k: complex) -> np.ndarray:
        self._require_k(k)
        return assemble_synthetic(self.model, k).matrix

    def t_dk(self, k: complex) -> np.ndarray:
        j = sign_value(self.model.j_sign)
        return (-1j * j / (k * k)) * np.diag(self.model.b_diag) + self.model.regular_dk(k)

    def logdet2(self, k: complex) -> complex:
        return log_det2(self.t_matrix(k))

    def dlogdet2_dk(self, k: complex) -> complex:
        t = self.t_matrix(k)
        d = self.t_dk(k)
        eye = np.eye(t.shape[0])
        return complex(np.trace(np.linalg.solve(eye + t, d)) - np.trace(d))

    def trace_dz(self, k: complex) -> complex:
        return complex(np.trace(self.t_dk(k)) / (2.0 * k))

    def resolved_trace(self, k: complex) -> complex:
        t = self.t_matrix(k)
        d = self.t_dk(k)
        eye = np.eye(t.shape[0])
        return complex(np.trace(np.linalg.solve(eye + t, d)) / (2.0 * k))

    def count_eigs_below(self, k: complex, threshold: float = -1.0,
                         herm_tol: float = 1e-8) -> int:
        t = self.t_matrix(k)
        if t.size == 0:
            return 0
        skew = np.abs(t - t.conj().T).max()
        if skew > herm_tol * max(1.0, np.abs(t).max()):
            raise DomainError("synthetic operator not self-adjoint at this point")
        return int(np.count_nonzero(np.linalg.eigvalsh(0.5 * (t + t.conj().T)) < threshold))

    def count_eigs_below_per_block(self, k: complex, threshold: float = -1.0,
                                   herm_tol: float = 1e-8, blocks=None) -> list[int]:
        return [self.count_eigs_below(k, threshold, herm_tol)]
