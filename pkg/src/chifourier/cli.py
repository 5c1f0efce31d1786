"""Command-line interface.

Usage::

    chifourier verify-all --config configs/disk.json --out runs/disk
    chifourier gamma-fit --config configs/koch.json
    chifourier phi-check --out runs/phi

Every subcommand accepts the global flags ``--config``, ``--out``,
``--seed`` and ``--threads``.  Exit codes: 0 pass (or flagged), 1 fail,
2 config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import fields
from . import littlewood_paley as lp
from .fields import ConfigurationError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(args, required: bool = True) -> ex.ScenarioConfig | None:
    if args.config is None:
        if required:
            raise ex.ConfigError(f"{args.command} needs --config")
        return None
    cfg = ex.ScenarioConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _out_dir(args, cfg) -> Path | None:
    out = args.out if args.out is not None else (cfg.out if cfg is not None else None)
    return Path(out) if out is not None else None


def _finish(result: dict, out: Path | None, name: str) -> int:
    """Write ``<name>.json`` plus tables, print a one-line summary, map status to an exit code."""
    if out is not None:
        ex.write_artifacts(result, out)
        ex.write_json(result, out / f"{name}.json")
    crit = result.get("criteria", {})
    bad = [k for k, c in crit.items() if not c["pass"]]
    line = f"{name}: {result['status']}"
    if bad:
        line += " (" + ", ".join(bad) + ")"
    if "error" in result:
        line += f" error: {result['error']}"
    print(line)
    return EXIT_FAIL if result["status"] == "fail" else EXIT_PASS


def cmd_rasterize(args) -> int:
    cfg = _load(args)
    scn = ex.Scenario(cfg)
    ind = scn.indicator
    exact = scn.shape.area()
    print(f"n={cfg.n} L={cfg.L:g} raster area={ind.integral():.8g} exact area={exact:.8g}")
    out = _out_dir(args, cfg)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fields.save_field(ind, out / "indicator.cfl")
    return EXIT_PASS


def cmd_boundary_profile(args) -> int:
    cfg = _load(args)
    prof = ex.Scenario(cfg).profile
    for d, v in zip(prof.deltas.tolist(), prof.volumes.tolist()):
        print(f"{d:.6e}\t{v:.6e}")
    out = _out_dir(args, cfg)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        prof.to_csv(out / "boundary_profile.csv")
    return EXIT_PASS


def cmd_gamma_fit(args) -> int:
    cfg = _load(args)
    res = ex.run_boundary(ex.Scenario(cfg))
    fit = res["fit"]
    print(f"gamma_hat={fit['gamma']:.4f} stderr={fit['stderr']:.2e} window={fit['window']}")
    return _finish(res, _out_dir(args, cfg), "boundary")


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    scn = ex.Scenario(cfg)
    spec = fields.forward_transform(scn.indicator)
    out = _out_dir(args, cfg)
    zero = spec.at((0,) * scn.spec.dim)
    print(f"chi_hat(0)={zero.real:.8g} area={scn.area:.8g}")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fields.save_field(spec, out / "spectrum.cfl")
        radii, env = ex.radial_envelope(scn)
        (out / "plotdata").mkdir(exist_ok=True)
        ex._write_tsv(out / "plotdata" / "spectrum_envelope.tsv", radii[1:], env[1:])
    return EXIT_PASS


def cmd_decay_fit(args) -> int:
    cfg = _load(args)
    scn = ex.Scenario(cfg)
    radii, env = ex.radial_envelope(scn)
    res = ex.fit_decay(radii, env, 2.0, scn.spec.half_nyquist)
    print(f"envelope exponent={res['exponent']:.4f} stderr={res['stderr']:.2e}")
    out = _out_dir(args, cfg)
    if out is not None:
        ex.write_json(res, out / "decay_fit.json")
    return EXIT_PASS


def cmd_lp_decompose(args) -> int:
    cfg = _load(args)
    scn = ex.Scenario(cfg)
    s = cfg.s if cfg.s is not None else (scn.spec.dim - scn.gamma) / cfg.q
    dec = lp.decompose(scn.indicator, scn.phi, s)
    lift = lp.bessel_lift(scn.half, s)
    rec = lp.reconstruct(dec)
    rel = fields.lp_norm(fields.ScalarField._wrap(scn.spec, rec.values - lift.values), 2) / fields.lp_norm(lift, 2)
    ks = np.arange(1, lp.k_max(scn.spec) + 1)
    cols = {"l2": np.array([fields.lp_norm(dec.pieces[k], 2) for k in ks.tolist()]),
            "sup": np.array([float(np.abs(dec.pieces[k].values).max()) for k in ks.tolist()])}
    rep = lp.DyadicReport("lp_pieces", ks, cols, meta={"s": s, "resum_vs_lift_rel_l2": rel})
    for k, a, b in zip(ks.tolist(), cols["l2"].tolist(), cols["sup"].tolist()):
        print(f"k={k:3d} |P_k|_2={a:.6e} |P_k|_inf={b:.6e}")
    # pieces stop at the half-Nyquist band, so this is the lift's relative mass above it
    print(f"re-sum vs Bessel lift, relative L2 difference={rel:.3e}")
    out = _out_dir(args, cfg)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        rep.to_csv(out / "lp_pieces.csv")
        ex.write_json(rep.to_dict(), out / "lp_decompose.json")
    return EXIT_PASS


def _check_cmd(check: str, needs_config: bool = True):
    def run(args) -> int:
        cfg = _load(args, required=needs_config)
        if cfg is None:
            cfg = ex.ScenarioConfig.from_dict({"name": "phi", "shape": {"type": "disk", "center": [0.5, 0.5],
                                                                        "radius": 0.25}, "n": 64,
                                               "seed": args.seed or 0})
        res = ex.run_check(check, ex.Scenario(cfg))
        return _finish(res, _out_dir(args, cfg), check)
    return run


def cmd_verify_all(args) -> int:
    cfg = _load(args)
    code, master = ex.verify_all(cfg, _out_dir(args, cfg))
    for name, res in master["checks"].items():
        print(f"{name:14s} {res['status']}")
    print(f"overall: {master['summary']['status']}")
    return code


COMMANDS = {
    "rasterize": (cmd_rasterize, "rasterize the configured shape"),
    "boundary-profile": (cmd_boundary_profile, "boundary neighbourhood volumes on the dyadic grid"),
    "gamma-fit": (cmd_gamma_fit, "fit the boundary exponent gamma"),
    "spectrum": (cmd_spectrum, "Fourier transform of the indicator"),
    "decay-fit": (cmd_decay_fit, "power-law fit of the radial spectrum envelope"),
    "weak-norm": (_check_cmd("weak_norm"), "weak L^p quasinorm of the spectrum and its certificate"),
    "fchar": (_check_cmd("fchar"), "spectral L^p norm against the boundary integral bound"),
    "lp-decompose": (cmd_lp_decompose, "Littlewood-Paley pieces and reconstruction"),
    "phi-check": (_check_cmd("phi", needs_config=False), "certify the dyadic partition function"),
    "sobolev-weak": (_check_cmd("sobolev_weak"), "weak Lorentz-Sobolev square-function check"),
    "bessel-oracle": (_check_cmd("bessel"), "disk transform against the Bessel closed form"),
    "verify-all": (cmd_verify_all, "run every configured check and write report.json"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chifourier", description=__doc__.splitlines()[0])
    _global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        # SUPPRESS keeps a flag given before the subcommand from being reset
        p = sub.add_parser(name, help=helptext)
        _global_flags(p, argparse.SUPPRESS)
    return parser


def _global_flags(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--config", default=default, help="scenario JSON file")
    p.add_argument("--out", default=default, help="output directory")
    p.add_argument("--seed", type=int, default=default, help="RNG seed (overrides the config)")
    p.add_argument("--threads", type=int, default=default, help="FFT worker threads")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.threads is not None:
            fields.set_fft_workers(args.threads)
        return COMMANDS[args.command][0](args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
