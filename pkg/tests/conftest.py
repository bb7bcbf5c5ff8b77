import math

import numpy as np
import pytest
from hypothesis import settings

from llres import birman_schwinger as bs, landau, potentials, resonances as rs, ssf

settings.register_profile("suite", max_examples=40, deadline=None)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def a2_entry():
    return potentials.by_name("a2_gauss")


@pytest.fixture(scope="session")
def a2_minus_entry():
    return potentials.by_name("a2_gauss_minus")


@pytest.fixture(scope="session")
def a2_family(a2_entry):
    grids = bs.make_grids(a2_entry.model, n_lll=12, q_max=2, ell_max=1,
                          axis_panels=3, axis_nodes=6, truncation=12.0)
    return bs.PauliFamily(a2_entry.spec, a2_entry.model, grids)


@pytest.fixture(scope="session")
def a2_minus_family(a2_minus_entry):
    grids = bs.make_grids(a2_minus_entry.model, n_lll=12, q_max=3, ell_max=1,
                          axis_panels=4, axis_nodes=7, truncation=12.0)
    return bs.PauliFamily(a2_minus_entry.spec, a2_minus_entry.model, grids)


@pytest.fixture(scope="session")
def a2_spectrum():
    return landau.toeplitz_spectrum(lambda r: np.exp(-r * r), 2.0, 48, radial=True)


@pytest.fixture(scope="session")
def catalog_spectra():
    """Reduced-weight spectra of every nonzero catalog entry (small bases)."""
    from llres.harness import _entry_spectrum

    out = {}
    for entry in potentials.catalog():
        if entry.name == "zero":
            continue
        out[entry.name] = _entry_spectrum(entry, 48)
    return out


@pytest.fixture(scope="session")
def annulus_report(a2_family):
    """Shared physical annulus scan used by counting and symmetry audits."""
    r_values = [2.0 ** -n for n in range(2, 6)]
    report = rs.scan_annulus(a2_family, 0.9 * r_values[-1], 2 * r_values[0],
                             rs.ScanConfig(refine_threshold=2e-3, seed=7))
    return r_values, report


@pytest.fixture(scope="session")
def krein_scan(a2_minus_family):
    return ssf.negative_axis_jumps(a2_minus_family, -1.9, -0.002, n_grid=90)


@pytest.fixture(scope="session")
def planted_bw():
    """Synthetic family with one engineered near-real-axis resonance pair,
    the covering scan, and the sampled shift derivative on the window."""
    beta, t, b, c = 0.05, 0.001, 0.2, -0.2
    a_mat = np.array([[-1.0 + t, b], [c, -1.0 + t]], dtype=complex)
    model = bs.SyntheticModel(b_diag=np.array([beta, beta]), a_coeffs=(a_mat,),
                              j_sign="plus")
    fam = bs.SyntheticFamily(model, k_min=0.005)
    from llres.model import RegionSpec, SectorBounds

    lo, hi = 0.02, 0.12
    region = RegionSpec(side="plus", theta0=0.7, epsilon0=0.7,
                        inner=SectorBounds(lo, hi, -1.2, 1.2),
                        outer=SectorBounds(0.5 * lo, 1.5 * hi, -1.3, 1.3), r=1.0)
    box = rs.Box(0.07, 0.45, -0.30, 0.30)
    report = rs.scan_resonances(fam, box, rs.ScanConfig(refine_threshold=1e-3, seed=6))
    mus = np.linspace(lo, hi, 1201)
    vals = np.array([ssf.xi_prime_resolvent(fam, m) for m in mus])
    decomp = ssf.breit_wigner_decompose(region, report, mus, vals)
    return fam, region, report, decomp


@pytest.fixture(scope="session")
def singularity_report(a2_entry):
    grids = bs.make_grids(a2_entry.model, n_lll=16, q_max=3, ell_max=1,
                          axis_panels=4, axis_nodes=7, truncation=12.0)
    fam = bs.PauliFamily(a2_entry.spec, a2_entry.model, grids)
    spec = landau.toeplitz_spectrum(lambda r: np.exp(-r * r), 2.0, 48, radial=True)
    lam_max, n_pts = 0.5, 10
    lams = np.geomspace(lam_max * 2.0 ** (-(n_pts - 1)), lam_max, n_pts)
    return ssf.phi_singularity_check(fam, spec, "plus", lams)


@pytest.fixture(scope="session")
def trace_reports(a2_family, a2_spectrum):
    """Trace-formula audits for f(z) = z and f(z) = z^2 across dyadic scales."""
    from llres.model import RegionSpec, SectorBounds

    region = RegionSpec(side="plus", theta0=0.6, epsilon0=0.6,
                        inner=SectorBounds(0.7, 2.1, -0.9, 0.9),
                        outer=SectorBounds(0.5, 2.5, -1.1, 1.1))
    out = {(): None}
    out.clear()
    for coeffs, tag in (([0.0, 1.0], "z"), ([0.0, 0.0, 1.0], "z2")):
        reports = []
        for r in (0.25, 0.125, 0.0625, 0.03125):
            k_out = math.sqrt(2.5 * r) * 1.06
            k_in = math.sqrt(0.5 * r) * math.cos(0.55) * 0.9
            box = rs.Box(k_in, k_out, -0.6 * k_out, 0.6 * k_out)
            scan = rs.scan_resonances(a2_family, box,
                                      rs.ScanConfig(refine_threshold=2e-3, seed=11))
            reports.append(ssf.trace_formula_check(
                region, coeffs, (0.5, 2.5), (0.7, 2.1), r, scan, a2_family,
                a2_spectrum, s1=0.5, n_quad=48))
        out[tag] = reports
    return out
