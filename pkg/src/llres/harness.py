"""CLI entry point, run configuration, experiment presets, output emission.

Every subcommand writes its data files plus ``manifest.json`` carrying the
canonical config, its hash, library versions and the wall time; the
timestamp lives in its own field so deterministic comparisons can drop it.
Exit codes: 0 success, 1 usage, 2 validation failure, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__, birman_schwinger as bs, landau, potentials, resonances, ssf
from .model import (MagneticModel, QuadratureError, RegionSpec, SectorBounds,
                    ValidationFailure, default_sample_grid, validate_potential)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

_ENV_OUT = "LLRES_OUT"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise _UsageError(message)


@dataclasses.dataclass
class RunConfig:
    """Serializable description of one run; hashes canonically."""

    pipeline: str = "toeplitz"
    potential: str = "a1_m4_plus"
    out_dir: str = "out"
    seed: int = 0
    workers: int = 0
    basis_size: int = 400
    n_lll: int = 16
    q_max: int = 4
    ell_max: int = 1
    axis_panels: int = 4
    axis_nodes: int = 7
    params: dict = dataclasses.field(default_factory=dict)
    tolerances: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.tolerances.items():
            if not value > 0:
                raise ValidationFailure(f"tolerance {name!r} must be positive, got {value}")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True,
                          separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))

    def canonical(self) -> "RunConfig":
        """The run identity: everything but where the output lands."""
        return dataclasses.replace(self, out_dir="")

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().to_json().encode()).hexdigest()


def preset_experiments() -> dict[str, RunConfig]:
    """Named configs backing the acceptance runs; deterministic."""
    return {
        "acc-counting-a1": RunConfig(
            pipeline="toeplitz", potential="a1_m4_plus", basis_size=600,
            params={"window": [1e-4, 1e-2], "n_window": 25}),
        "acc-counting-a2": RunConfig(
            pipeline="toeplitz", potential="a2_gauss", basis_size=64,
            params={"window": [1e-8, 1e-3], "n_window": 21}),
        "acc-bw-lorentzian": RunConfig(
            pipeline="breit-wigner", potential="synthetic",
            params={"b_diag": [0.05, 0.05], "j_sign": "plus",
                    "coupling": [[-0.999, 0.2], [-0.2, -0.999]],
                    "interval": [0.02, 0.12],
                    "box": [0.07, 0.45, -0.30, 0.30],
                    "n_samples": 1201, "k_min": 0.005}),
        "acc-singularity-a2": RunConfig(
            pipeline="singularity", potential="a2_gauss", n_lll=20,
            params={"lambda_max": 0.5, "n_points": 10}),
        "acc-trace-z": RunConfig(
            pipeline="trace-check", potential="a2_gauss", n_lll=14, q_max=3,
            params={"r_values": [0.25, 0.125, 0.0625, 0.03125],
                    "f_coeffs": [0.0, 1.0], "s1": 0.5}),
        "acc-krein": RunConfig(
            pipeline="ssf", potential="a2_gauss_minus", n_lll=14, q_max=3,
            params={"window": [-1.9, -1e-3], "n_grid": 120}),
        "acc-scan-sym": RunConfig(
            pipeline="scan", potential="a2_gauss", n_lll=14, q_max=2,
            params={"box": [-0.6, 0.6, -0.62, -0.02], "refine": 2e-3}),
    }


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _out_dir(cfg: RunConfig) -> str:
    out = os.environ.get(_ENV_OUT, cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    return out


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating))
                             else str(v) for v in row) + "\n")


def _write_manifest(out: str, cfg: RunConfig, t0: float) -> None:
    manifest = {
        "config": json.loads(cfg.canonical().to_json()),
        "config_hash": cfg.config_hash(),
        "out_dir": out,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "llres": __version__,
        },
        "seed": cfg.seed,
        "wall_time_s": round(time.monotonic() - t0, 6),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grids_for(cfg: RunConfig, entry) -> bs.Grids:
    return bs.make_grids(entry.model, n_lll=cfg.n_lll, q_max=cfg.q_max,
                         ell_max=cfg.ell_max, axis_panels=cfg.axis_panels,
                         axis_nodes=cfg.axis_nodes)


def _entry_spectrum(entry, basis_size: int) -> landau.ToeplitzSpectrum:
    """Reduced-weight spectrum of a catalog entry.

    The shipped axis factors integrate to one, so the reduced weight is the
    (1,1) entry of the spin factor's absolute value times the transverse
    profile.
    """
    from .model import matrix_abs

    sep = entry.spec.separable
    abs_11 = float(matrix_abs(sep.spin_matrix[None])[0, 0, 0].real)

    def w(r):
        return abs_11 * sep.transverse_profile(r)

    return landau.toeplitz_spectrum(w, entry.model.b0, basis_size, radial=True)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(cfg: RunConfig) -> int:
    entry = potentials.by_name(cfg.potential)
    report = validate_potential(entry.spec, entry.model,
                                default_sample_grid(entry.model.gamma))
    out = _out_dir(cfg)
    t0 = time.monotonic()
    with open(os.path.join(out, "validation.json"), "w") as fh:
        json.dump({
            "potential": cfg.potential,
            "passed": report.passed,
            "max_envelope_ratio": report.max_envelope_ratio,
            "max_hermiticity_defect": report.max_hermiticity_defect,
            "definiteness_verdict": report.definiteness_verdict,
            "degenerate": report.degenerate,
            "failures": list(report.failures),
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, cfg, t0)
    print(f"validate {cfg.potential}: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_toeplitz(cfg: RunConfig) -> int:
    t0 = time.monotonic()
    entry = potentials.by_name(cfg.potential)
    spec = _entry_spectrum(entry, cfg.basis_size)
    out = _out_dir(cfg)
    _write_csv(os.path.join(out, "spectrum.csv"), ["index", "eigenvalue"],
               [(i, v) for i, v in enumerate(spec.eigenvalues)])
    window = cfg.params.get("window", [1e-4, 1e-1])
    n_window = int(cfg.params.get("n_window", 25))
    rs = np.geomspace(window[0], window[1], n_window)
    _write_csv(os.path.join(out, "counting.csv"), ["r", "count"],
               [(r, landau.counting_function(spec, r)) for r in rs])
    lams = np.geomspace(cfg.params.get("lambda_min", 1e-4),
                        cfg.params.get("lambda_max", 0.5),
                        int(cfg.params.get("n_lambda", 25)))
    _write_csv(os.path.join(out, "phi.csv"), ["lambda", "phi"],
               [(l, landau.phi(spec, l)) for l in lams])
    _write_manifest(out, cfg, t0)
    print(f"toeplitz {cfg.potential}: wrote spectrum/counting/phi "
          f"(top eigenvalue {spec.eigenvalues[0]:.6g})")
    return EXIT_OK


def _family_for(cfg: RunConfig):
    if cfg.potential == "synthetic":
        b_diag = np.asarray(cfg.params.get("b_diag", [0.1]), dtype=float)
        coeff = cfg.params.get("coupling")
        coeffs = ()
        if coeff is not None:
            coeffs = (np.asarray(coeff, dtype=complex) * cfg.params.get("coupling_scale", 1.0),)
        model = bs.SyntheticModel(b_diag=b_diag, a_coeffs=coeffs,
                                  j_sign=cfg.params.get("j_sign", "plus"))
        return bs.SyntheticFamily(model, k_min=float(cfg.params.get("k_min", 1e-4))), None
    entry = potentials.by_name(cfg.potential)
    fam = bs.PauliFamily(entry.spec, entry.model, _grids_for(cfg, entry))
    return fam, entry


def cmd_scan(cfg: RunConfig) -> int:
    t0 = time.monotonic()
    family, _ = _family_for(cfg)
    box_vals = cfg.params.get("box", [-0.5, 0.5, -0.5, 0.02])
    box = resonances.Box(*box_vals)
    scan_cfg = resonances.ScanConfig(
        refine_threshold=float(cfg.params.get("refine", 2e-3)),
        seed=cfg.seed,
        workers=cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1))
    report = resonances.scan_resonances(family, box, scan_cfg)
    out = _out_dir(cfg)
    _write_csv(os.path.join(out, "resonances.csv"),
               ["re_k", "im_k", "re_z", "im_z", "multiplicity", "residual"],
               [(r.k.real, r.k.imag, r.z.real, r.z.imag, r.multiplicity, r.residual)
                for r in report.resonances])
    with open(os.path.join(out, "scan_report.json"), "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    _write_manifest(out, cfg, t0)
    print(f"scan {cfg.potential}: {len(report.resonances)} resonances, "
          f"{len(report.unresolved)} unresolved boxes")
    return EXIT_OK


def cmd_ssf(cfg: RunConfig) -> int:
    t0 = time.monotonic()
    family, _ = _family_for(cfg)
    window = cfg.params.get("window", [-0.5, -1e-3])
    n_grid = int(cfg.params.get("n_grid", 60))
    lo, hi = window
    if lo < 0 and hi < 0:
        lams = -np.geomspace(abs(lo), abs(hi), n_grid)
    elif lo > 0 and hi > 0:
        lams = np.geomspace(lo, hi, n_grid)
    else:
        raise ValidationFailure("ssf window must not straddle the origin")
    prof = ssf.compute_profile(family, lams, with_xi_prime=bool(
        cfg.params.get("with_xi_prime", False)))
    out = _out_dir(cfg)
    _write_csv(os.path.join(out, "ssf.csv"),
               ["lambda", "xi2", "xi_prime", "xi"],
               [(l, a, b, c) for l, a, b, c in
                zip(prof.lambdas, prof.xi2, prof.xi_prime, prof.xi)])
    _write_manifest(out, cfg, t0)
    print(f"ssf {cfg.potential}: profile of {len(lams)} energies written")
    return EXIT_OK


def cmd_breit_wigner(cfg: RunConfig) -> int:
    t0 = time.monotonic()
    family, _ = _family_for(cfg)
    lo, hi = cfg.params.get("interval", [0.02, 0.12])
    region = RegionSpec(side="plus", theta0=0.7, epsilon0=0.7,
                        inner=SectorBounds(lo, hi, -1.2, 1.2),
                        outer=SectorBounds(0.5 * lo, 1.5 * hi, -1.3, 1.3),
                        r=1.0, sector_delta=1.0)
    scan_box = resonances.Box(*cfg.params.get("box", [0.07, 0.45, -0.30, 0.30]))
    report = resonances.scan_resonances(
        family, scan_box, resonances.ScanConfig(refine_threshold=1e-3, seed=cfg.seed))
    mus = np.linspace(lo, hi, int(cfg.params.get("n_samples", 401)))
    reals = [r.z.real for r in report.resonances if abs(r.z.imag) < 1e-10]
    vals = np.array([ssf.xi_prime_resolvent(family, m) for m in mus])
    decomp = ssf.breit_wigner_decompose(region, report, mus, vals)
    out = _out_dir(cfg)
    _write_csv(os.path.join(out, "breit_wigner.csv"),
               ["mu", "xi_prime", "lorentzian_sum", "residual"],
               [(m, x, l, r_) for m, x, l, r_ in
                zip(decomp.mus, decomp.xi_prime, decomp.lorentzian_sum, decomp.residual)])
    payload = {
        "config_hash": cfg.config_hash(),
        "interval": list(decomp.interval),
        "delta_locations": list(decomp.delta_locations),
        "n_resonances_used": len(decomp.resonances_used),
        "residual_sup": float(np.abs(decomp.residual).max()),
        "real_resonances_in_scan": reals,
    }
    with open(os.path.join(out, "breit_wigner.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, cfg, t0)
    print(f"breit-wigner: {len(decomp.resonances_used)} peaks, "
          f"residual sup {payload['residual_sup']:.4g}")
    return EXIT_OK


def cmd_singularity(cfg: RunConfig) -> int:
    t0 = time.monotonic()
    family, entry = _family_for(cfg)
    if entry is None:
        raise ValidationFailure("singularity pipeline needs a catalog potential")
    if entry.spec.sign not in ("plus", "minus"):
        raise ValidationFailure("singularity pipeline needs a definite sign")
    spec = _entry_spectrum(entry, max(64, cfg.basis_size // 4))
    lam_max = float(cfg.params.get("lambda_max", 0.5))
    n_pts = int(cfg.params.get("n_points", 10))
    floor = (1.05 * family.k_min) ** 2
    lams = np.geomspace(max(lam_max * 2.0 ** (-(n_pts - 1)), floor), lam_max, n_pts)
    rep = ssf.phi_singularity_check(family, spec, entry.spec.sign, lams)
    out = _out_dir(cfg)
    _write_csv(os.path.join(out, "singularity.csv"),
               ["lambda", "xi", "phi", "ratio"],
               [(l, x, p, r_) for l, x, p, r_ in
                zip(rep.lambdas, rep.xi, rep.phi, rep.ratios)])
    with open(os.path.join(out, "singularity.json"), "w") as fh:
        json.dump({
            "config_hash": cfg.config_hash(),
            "ratio_at_smallest": float(rep.ratios[0]),
            "trend_improved": rep.trend_improved,
            "sigma_bound_ok": rep.sigma_bound_ok,
            "envelope_constant": rep.envelope_constant,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, cfg, t0)
    print(f"singularity {cfg.potential}: ratio {rep.ratios[0]:.3f} at "
          f"lambda={rep.lambdas[0]:.3g}")
    return EXIT_OK


def cmd_trace_check(cfg: RunConfig) -> int:
    t0 = time.monotonic()
    family, entry = _family_for(cfg)
    if entry is None:
        raise ValidationFailure("trace-check needs a catalog potential")
    spec = _entry_spectrum(entry, max(64, cfg.basis_size // 4))
    r_values = cfg.params.get("r_values", [0.25, 0.125, 0.0625])
    f_coeffs = cfg.params.get("f_coeffs", [0.0, 1.0])
    s1 = float(cfg.params.get("s1", 0.5))
    region = RegionSpec(side="plus", theta0=0.6, epsilon0=0.6,
                        inner=SectorBounds(0.7, 2.1, -0.9, 0.9),
                        outer=SectorBounds(0.5, 2.5, -1.1, 1.1))
    reports = []
    for r in r_values:
        # the right spectral side maps into the right half of the pointed
        # disk, so the covering box stays clear of the excluded origin
        k_out = math.sqrt(2.5 * r) * 1.06
        k_in = math.sqrt(0.5 * r) * math.cos(0.55) * 0.9
        box = resonances.Box(k_in, k_out, -0.6 * k_out, 0.6 * k_out)
        scan = resonances.scan_resonances(
            family, box, resonances.ScanConfig(refine_threshold=2e-3, seed=cfg.seed))
        rep = ssf.trace_formula_check(region, f_coeffs, (0.5, 2.5), (0.7, 2.1),
                                      r, scan, family, spec, s1)
        reports.append(rep)
    out = _out_dir(cfg)
    with open(os.path.join(out, "trace_check.json"), "w") as fh:
        json.dump({
            "config_hash": cfg.config_hash(),
            "reports": [dataclasses.asdict(rp) for rp in reports],
            "max_ratio": max(rp.ratio for rp in reports),
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, cfg, t0)
    for rp in reports:
        print(f"trace-check r={rp.r:.5g}: |lhs-rhs|={rp.diff:.4g} "
              f"budget={rp.sup_f * rp.n_bound:.4g} ratio={rp.ratio:.4g}")
    return EXIT_OK


def cmd_oracle_regen(cfg: RunConfig) -> int:
    t0 = time.monotonic()
    path = potentials.regenerate_references(cfg.params.get("path"))
    out = _out_dir(cfg)
    _write_manifest(out, cfg, t0)
    print(f"oracle-regen: wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "toeplitz": cmd_toeplitz,
    "scan": cmd_scan,
    "ssf": cmd_ssf,
    "breit-wigner": cmd_breit_wigner,
    "singularity": cmd_singularity,
    "trace-check": cmd_trace_check,
    "oracle-regen": cmd_oracle_regen,
    "validate": cmd_validate,
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="llres", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--potential", default="a1_m4_plus")
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=0)
        p.add_argument("--basis", type=int, default=400)
        p.add_argument("--n-lll", type=int, default=16)
        p.add_argument("--q-max", type=int, default=4)
        p.add_argument("--preset", default=None,
                       help="load a named preset config, then apply flags")
        p.add_argument("--config", default=None,
                       help="path to a JSON RunConfig to start from")
        p.add_argument("--param", action="append", default=[],
                       help="pipeline parameter KEY=JSON_VALUE, repeatable")
    return parser


def cli_main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    if args.config:
        with open(args.config) as fh:
            cfg = RunConfig.from_json(fh.read())
    elif args.preset:
        presets = preset_experiments()
        if args.preset not in presets:
            print(f"error: unknown preset {args.preset!r}", file=sys.stderr)
            return EXIT_USAGE
        cfg = presets[args.preset]
    else:
        cfg = RunConfig()
    cfg = dataclasses.replace(
        cfg, pipeline=args.command, potential=args.potential, out_dir=args.out,
        seed=args.seed, workers=args.workers, basis_size=args.basis,
        n_lll=args.n_lll, q_max=args.q_max)
    for kv in args.param:
        key, _, raw = kv.partition("=")
        cfg.params[key] = json.loads(raw)

    try:
        return _COMMANDS[args.command](cfg)
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QuadratureError, ssf.UnwrapError, resonances.UnresolvedBoxError) as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def cli_entry() -> None:
    raise SystemExit(cli_main())
