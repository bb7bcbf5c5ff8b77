import numpy as np
import pytest

from llres import landau, potentials
from llres.model import default_sample_grid, validate_potential


@pytest.fixture(scope="module")
def entries():
    return {e.name: e for e in potentials.catalog()}


class TestCatalogShape:
    def test_required_entries_present(self, entries):
        assert len(entries) >= 6
        for name in ("zero", "a1_m3_plus", "a1_m3_minus", "a1_m4_plus",
                     "a1_m4_minus", "a2_gauss", "a2_gauss_minus", "a3_bump",
                     "indefinite_coupled", "scalar_gauss"):
            assert name in entries

    def test_scalar_mode_entry(self, entries):
        e = entries["scalar_gauss"]
        assert e.spec.scalar_mode
        assert e.spec.spin_dim == 1
        v = e.spec.sample(np.zeros((1, 2)), np.zeros(1))
        assert v.shape == (1, 1, 1)

    def test_indefinite_entry_couples_spins(self, entries):
        e = entries["indefinite_coupled"]
        v = e.spec.sample(np.zeros((1, 2)), np.zeros(1))[0]
        assert abs(v[0, 1]) > 0
        eig = np.linalg.eigvalsh(v)
        assert eig[0] < 0 < eig[1]

    def test_every_entry_validates(self, entries):
        for e in entries.values():
            rep = validate_potential(e.spec, e.model,
                                     default_sample_grid(e.model.gamma))
            assert rep.passed, f"{e.name}: {rep.failures}"

    def test_definite_signs_consistent(self, entries):
        for e in entries.values():
            rep = validate_potential(e.spec, e.model,
                                     default_sample_grid(e.model.gamma))
            if e.spec.sign in ("plus", "minus") and not rep.degenerate:
                assert rep.definiteness_verdict == e.spec.sign

    def test_zero_entry_flagged_degenerate(self, entries):
        rep = validate_potential(entries["zero"].spec, entries["zero"].model)
        assert rep.degenerate


class TestReferenceValues:
    def test_every_reference_carries_provenance(self, entries):
        for e in entries.values():
            for name, ref in e.reference_values.items():
                assert "oracle" in ref, f"{e.name}.{name} lacks provenance"
                assert "tolerance" in ref

    def test_gaussian_geometric_reference(self, entries):
        ref = entries["a2_gauss"].reference_values["toeplitz_top_eigenvalues"]
        vals = np.asarray(ref["values"])
        expect = np.array([0.5 ** (m + 1) for m in range(len(vals))])
        assert np.abs(vals - expect).max() < 1e-9

    def test_counting_references(self, entries):
        ref = entries["a1_m4_plus"].reference_values
        assert ref["counting_exponent"]["value"] == pytest.approx(-0.5)
        assert ref["counting_prefactor"]["value"] == pytest.approx(0.5)

    def test_production_path_reproduces_references(self, entries,
                                                   catalog_spectra):
        for name, spec in catalog_spectra.items():
            ref = entries[name].reference_values.get("toeplitz_top_eigenvalues")
            if ref is None:
                continue
            vals = np.asarray(ref["values"])
            assert np.abs(spec.eigenvalues[:len(vals)] - vals).max() < ref["tolerance"], name

    def test_regeneration_matches_shipped_file(self, tmp_path):
        import json
        out = tmp_path / "refs.json"
        potentials.regenerate_references(out)
        fresh = json.loads(out.read_text())
        shipped = potentials._load_references()
        assert set(fresh) == set(shipped)
        for name in fresh:
            for key, ref in fresh[name].items():
                ship = shipped[name][key]
                if isinstance(ref.get("values"), list):
                    assert np.allclose(ref["values"], ship["values"],
                                       atol=ref["tolerance"])
                else:
                    assert ref["value"] == ship["value"]


class TestZeroEntryEndToEnd:
    def test_all_pipelines_identically_zero(self, entries):
        import llres.birman_schwinger as bs
        import llres.ssf as ssf_mod

        e = entries["zero"]
        grids = bs.make_grids(e.model, n_lll=4, q_max=1, ell_max=0,
                              axis_panels=3, axis_nodes=6, truncation=12.0)
        fam = bs.PauliFamily(e.spec, e.model, grids)
        assert np.abs(fam.b_matrix).max() == 0.0
        assert fam.logdet2(0.2 - 0.1j) == 0.0
        assert fam.trace_dz(0.2 - 0.1j) == 0.0
        prof = ssf_mod.compute_profile(fam, [-0.3, 0.1, 0.4])
        assert np.abs(prof.xi).max() == 0.0
        assert np.abs(prof.xi2).max() == 0.0


class TestAxisNormalization:
    def test_axis_profiles_integrate_to_one(self, entries):
        from scipy.integrate import quad
        for name in ("a1_m4_plus", "a2_gauss_minus"):
            g = entries[name].spec.separable.axis_profile
            val, _ = quad(lambda t: float(g(np.array([t]))[0]), -np.inf, np.inf)
            assert val == pytest.approx(1.0, abs=1e-9)

    def test_reduced_weight_matches_transverse_profile(self, entries):
        # axis factor normalized away: W equals |spin|_11 * coupling * profile
        from llres.model import transverse_weight_W
        e = entries["indefinite_coupled"]
        x = np.array([0.8, -0.4])
        w_quad = transverse_weight_W(e.spec, x, tol=1e-11)
        abs11 = e.reference_values["abs_spin_11"]["value"]
        expect = abs11 * (1 + np.dot(x, x)) ** -2
        assert w_quad == pytest.approx(expect, rel=1e-8)
