"""Shift-profile experiment: sampled (xi2, xi', xi) on a positive window plus
the low-energy ratio against the arctan trace."""

import argparse

import numpy as np

from llres import birman_schwinger as bs, landau, potentials, ssf
from llres.harness import _entry_spectrum


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--potential", default="a2_gauss")
    ap.add_argument("--lam-min", type=float, default=1e-3)
    ap.add_argument("--lam-max", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=10)
    args = ap.parse_args()

    entry = potentials.by_name(args.potential)
    grids = bs.make_grids(entry.model, n_lll=16, q_max=3, ell_max=1,
                          axis_panels=4, axis_nodes=7, truncation=12.0)
    fam = bs.PauliFamily(entry.spec, entry.model, grids)
    lams = np.geomspace(args.lam_min, args.lam_max, args.n)
    prof = ssf.compute_profile(fam, lams, with_xi_prime=False)
    spec = _entry_spectrum(entry, 64)
    print("lambda        xi2        xi         pi*xi/phi")
    for lam, x2, x in zip(prof.lambdas, prof.xi2, prof.xi):
        phi = landau.phi(spec, lam)
        ratio = np.pi * x / phi if phi > 1e-12 else float("nan")
        print(f"{lam:10.5f} {x2:10.5f} {x:10.5f} {ratio:10.5f}")


if __name__ == "__main__":
    main()
