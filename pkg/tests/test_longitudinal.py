import numpy as np
import pytest
from hypothesis import given, strategies as st

from llres import longitudinal as lg
from llres.longitudinal import SingularInputError


@pytest.fixture(scope="module")
def grid():
    return lg.build_axis_grid(2.0, truncation=12.0, n_panels_half=4,
                              nodes_per_panel=7)


class TestAxisGrid:
    def test_self_check_integral(self, grid):
        from llres.model import bracket
        val = np.dot(grid.weights, np.exp(-2.0 * bracket(grid.nodes)))
        from scipy.integrate import quad
        ref, _ = quad(lambda t: np.exp(-2.0 * np.sqrt(1 + t * t)), -np.inf, np.inf)
        assert val == pytest.approx(ref, rel=1e-6)

    def test_nodes_symmetric(self, grid):
        assert np.abs(grid.nodes + grid.nodes[::-1]).max() < 1e-12


class TestResolventKernel:
    def test_coincident_points(self):
        assert lg.resolvent_kernel_1d(1j, 0.3, 0.3) == pytest.approx(0.5)
        k = 0.4 - 0.1j
        assert lg.resolvent_kernel_1d(k, 1.0, 1.0) == pytest.approx(1j / (2 * k))

    def test_unit_k_at_pi_separation(self):
        assert lg.resolvent_kernel_1d(1.0, 0.0, np.pi) == pytest.approx(-0.5j)

    def test_singular_origin_rejected(self):
        with pytest.raises(SingularInputError):
            lg.resolvent_kernel_1d(0.0, 0.0, 1.0)

    @given(st.floats(0.05, 3), st.floats(-5, 5), st.floats(-5, 5))
    def test_reflection_symmetry_real_k(self, k, t, tp):
        lhs = np.conj(lg.resolvent_kernel_1d(k, t, tp))
        rhs = lg.resolvent_kernel_1d(-k, t, tp)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestFlattenedKernel:
    def test_vanishes_on_diagonal(self):
        assert lg.s_kernel(0.7 - 0.2j, 1.3, 1.3) == 0.0

    def test_origin_limit(self):
        assert lg.s_kernel(0.0, 0.0, 3.0) == pytest.approx(-1.5)
        assert lg.s_kernel(0.0, -2.0, 2.0) == pytest.approx(-2.0)

    def test_switch_threshold(self):
        assert lg.series_switch_threshold(1e-6, 1.0) == "series"
        assert lg.series_switch_threshold(1.0, 1.0) == "direct"

    def test_series_and_direct_agree_at_switch(self):
        d = 1.0
        k = lg.SERIES_SWITCH  # |k*d| exactly at the switch point
        series = lg._s_series(k, np.array([d]))[0]
        direct = (1.0 - np.exp(1j * k * d)) / (2j * k)
        assert abs(series - direct) < 1e-12

    def test_joint_continuity_through_origin(self):
        ds = np.linspace(0.0, 4.0, 23)
        for k in (1e-9, 1e-9 * 1j, 1e-7 - 1e-8j):
            vals = lg.s_kernel(k, ds, np.zeros_like(ds))
            assert np.abs(vals - (-0.5 * ds)).max() < 1e-6

    def test_split_identity_on_grid(self, grid):
        # weighted resolvent = rank-one/k + weighted flattened kernel, entrywise
        for k in (0.3 - 0.2j, 0.05 + 0.6j, 1e-3 - 1e-3j):
            lhs = lg.weighted_resolvent_matrix(grid, k)
            rhs = lg.rank_one_matrix(grid) / k + lg.weighted_s_matrix(grid, k)
            assert np.abs(lhs - rhs).max() < 1e-10

    def test_analytic_derivatives_match_differences(self):
        h = 1e-6
        for k in (0.4 - 0.1j, 2e-5 + 1e-5j):
            fd = (lg.s_kernel(k + h, 0.0, 2.0) - lg.s_kernel(k - h, 0.0, 2.0)) / (2 * h)
            assert abs(fd - lg.s_kernel_dk(k, 0.0, 2.0)) < 1e-8
        k = 0.4 - 0.1j
        fd = (lg.resolvent_kernel_1d(k + h, 0.0, 2.0)
              - lg.resolvent_kernel_1d(k - h, 0.0, 2.0)) / (2 * h)
        assert abs(fd - lg.resolvent_kernel_dk(k, 0.0, 2.0)) < 1e-8


class TestRankOne:
    def test_self_pairing(self, grid):
        e = lg.decay_vector(grid)
        norm2 = np.dot(grid.weights, e * e)
        out = lg.rank_one_a(grid, e)
        assert np.allclose(out, 0.5j * norm2 * e, atol=1e-14)

    def test_orthogonal_input_annihilated(self, grid):
        e = lg.decay_vector(grid)
        u = grid.nodes * e  # odd against even weight
        out = lg.rank_one_a(grid, u)
        assert np.abs(out).max() < 1e-14

    def test_matrix_rank_one(self, grid):
        mat = lg.rank_one_matrix(grid)
        s = np.linalg.svd(mat, compute_uv=False)
        assert s[1] < 1e-12 * s[0]

    def test_rank_one_is_square_of_coupling_functional(self, grid):
        # -2i * (rank-one operator) equals the outer square of the coupling row
        c = lg.coupling_functional(grid)
        assert np.allclose(-2j * lg.rank_one_matrix(grid), np.outer(c, c),
                           atol=1e-15)


class TestWeightedDomain:
    def test_norm_finite_above_floor_and_growing_toward_it(self, grid):
        # weighted resolvent stays square-summable for Im k > -gamma/2 and
        # its norm grows monotonically as the margin closes
        margins = [0.4, 0.2, 0.1, 0.05]
        norms = []
        for m in margins:
            k = 0.2 + (-1.0 + m) * 1j  # gamma/2 = 1
            norms.append(np.linalg.norm(lg.weighted_resolvent_matrix(grid, k)))
        assert all(np.isfinite(norms))
        assert all(a < b for a, b in zip(norms, norms[1:]))
