"""Command-line interface.

Subcommands map one-to-one onto the package's artifact surfaces:

- ``spin-chain`` / ``random-system``: measure binned off-diagonal statistics
  plus configured prediction curves for one system.
- ``coeffs``: eigenstate scrambling coefficients for representative states.
- ``predict``: evaluate ansatz curves alone on an omega grid.
- ``localize``: operator localizability report.
- ``reproduce {fig1,fig2,fig3,appB}``: the bundled datasets.

Exit codes: 0 success, 2 configuration error, 3 compute error, 4 cache
policy failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import AnsatzKind
from .errors import CacheMissError, EthlabError, ValidationError
from .figures import (
    FIGURES,
    _AUTO_KINDS,
    _Densities,
    _ensemble_windows,
    _config_echo,
    _fig1,
    _make_model,
    build_system,
)
from .io import (
    RunConfig,
    emit_dataset,
    parse_config,
    prediction_rows,
    resolve_out_dir,
    write_manifest,
)
from .figures import run_figure
from .hamiltonians import PAULI, pauli, site_operator
from .localize import localizability, localizing_basis
from .linalg import eig_sym
from .scrambling import compute_coefficients, profile

__all__ = ["main", "entry", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file")
    common.add_argument("--seed", type=int, help="override the ensemble seed")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default $ETHLAB_OUT or ./ethlab-out)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for the operator ensemble")
    common.add_argument("--cache", choices=("use", "recompute", "forbid"),
                        default="use", help="eigendecomposition cache policy")
    common.add_argument("--plot", action="store_true",
                        help="emit SVG plots alongside the CSV datasets")

    parser = argparse.ArgumentParser(
        prog="ethlab",
        description="eigenstate-thermalization statistics laboratory",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    spin = sub.add_parser("spin-chain", parents=[common],
                          help="binned statistics for the configured chain")
    spin.add_argument("--ebar", type=float, action="append",
                      help="mean-energy window center (repeatable; default 0)")

    rand = sub.add_parser("random-system", parents=[common],
                          help="binned statistics for the random family")
    rand.add_argument("--ebar", type=float, action="append",
                      help="mean-energy window center (repeatable; default 0)")

    sub.add_parser("coeffs", parents=[common],
                   help="scrambling coefficients for representative states")

    pred = sub.add_parser("predict", parents=[common],
                          help="evaluate ansatz prediction curves")
    pred.add_argument("--ebar", type=float, default=0.0,
                      help="mean energy of the curves (default 0)")
    pred.add_argument("--omega-max", type=float, default=None,
                      help="grid upper edge (default 0.75 of the A range)")

    loc = sub.add_parser("localize", parents=[common],
                         help="operator localizability report")
    spec_group = loc.add_mutually_exclusive_group(required=True)
    spec_group.add_argument(
        "--pauli", metavar="LETTERS",
        help="operator as per-site Pauli letters, e.g. zix for sz(1) sx(3)",
    )
    spec_group.add_argument(
        "--matrix", metavar="PATH", help="operator from a .npy or .csv file"
    )

    rep = sub.add_parser("reproduce", parents=[common],
                         help="produce one bundled dataset")
    rep.add_argument("figure", choices=FIGURES)
    return parser


def _load_config(args, force_kind=None) -> RunConfig:
    if args.config:
        config = parse_config(args.config, force_kind=force_kind)
    else:
        config = parse_config(None, text="", force_kind=force_kind)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def _run_system(args, force_kind: str) -> int:
    config = _load_config(args, force_kind=force_kind)
    out_dir = resolve_out_dir(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = build_system(config, cache_dir=out_dir / "cache", policy=args.cache)
    centers = args.ebar if args.ebar else [0.0]
    kinds = config.predict_kinds or _AUTO_KINDS["run"]
    stem = "run"
    info, files, _ = _ensemble_windows(
        config, system, kinds, out_dir, stem, centers, args.plot, args.threads
    )
    manifest = {
        "experiment": force_kind,
        "config": _config_echo(config, kinds),
        "files": sorted(str(Path(f).name) for f in files),
        **info,
    }
    write_manifest(manifest, out_dir / f"{stem}_manifest.json")
    print(f"wrote {len(files)} dataset file(s) to {out_dir}")
    print(f"sigma_S = {info['sigma_s']:.6g}")
    return 0


def _run_coeffs(args) -> int:
    config = _load_config(args)
    out_dir = resolve_out_dir(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = build_system(config, cache_dir=out_dir / "cache", policy=args.cache)
    manifest, files = _fig1(
        config, system, out_dir, args.plot, args.threads, stem="coeffs"
    )
    manifest["experiment"] = "coeffs"
    manifest["config"] = _config_echo(config, ())
    manifest["files"] = sorted(str(Path(f).name) for f in files)
    write_manifest(manifest, out_dir / "coeffs_manifest.json")
    print(f"wrote {len(files)} dataset file(s) to {out_dir}")
    print(f"sigma_S = {manifest['sigma_s']:.6g}")
    return 0


def _run_predict(args) -> int:
    config = _load_config(args)
    out_dir = resolve_out_dir(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = build_system(config, cache_dir=out_dir / "cache", policy=args.cache)
    coeffs = compute_coefficients(system)
    prof = profile(coeffs)
    dens = _Densities(system)
    kinds = config.predict_kinds or _AUTO_KINDS["run"]
    sigma_a = system.spectrum_a.spectral_range
    omega_max = args.omega_max if args.omega_max else 0.75 * sigma_a
    width = config.binning.resolve_width(system.spectrum_t.spectral_range)
    omegas = np.arange(0.5 * width, omega_max, width)
    preds = []
    for kind in kinds:
        model = _make_model(kind, system, prof.sigma_s, config.o2bar, dens)
        preds.append(model.evaluate(args.ebar, omegas))
    path = emit_dataset(prediction_rows(preds), "prediction",
                        out_dir / "predict.csv")
    manifest = {
        "experiment": "predict",
        "config": _config_echo(config, kinds),
        "ebar": args.ebar,
        "sigma_s": prof.sigma_s,
        "sigma_a": sigma_a,
        "files": [path.name],
    }
    write_manifest(manifest, out_dir / "predict_manifest.json")
    print(f"wrote {path}")
    print(f"sigma_S = {prof.sigma_s:.6g}")
    return 0


def _operator_from_args(args) -> np.ndarray:
    if args.pauli:
        letters = args.pauli.strip().lower()
        bad = set(letters) - set(PAULI)
        if bad:
            raise ValidationError(
                f"unknown Pauli letters {sorted(bad)}; use i, x, z"
            )
        op = np.array([[1.0]])
        for letter in letters:
            op = np.kron(op, pauli(letter))
        return op
    path = Path(args.matrix)
    if not path.is_file():
        raise ValidationError(f"operator file not found: {path}")
    if path.suffix == ".npy":
        op = np.load(path)
    else:
        op = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.asarray(op, dtype=float)


def _run_localize(args) -> int:
    op = _operator_from_args(args)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValidationError(f"operator must be square, got shape {op.shape}")
    spectrum = eig_sym(op)
    report = localizability(spectrum.eigenvalues)
    basis, block = localizing_basis(op)
    print(f"total_dim     = {report.total_dim}")
    print(f"local_dim     = {report.local_dim}")
    print(f"gcd           = {report.multiplicity_gcd}")
    print("classes       = " + ", ".join(
        f"{value:.9g} (x{mult})" for value, mult in report.classes
    ))
    if args.out:
        out_dir = resolve_out_dir(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = {
            "experiment": "localize",
            "total_dim": report.total_dim,
            "local_dim": report.local_dim,
            "gcd": report.multiplicity_gcd,
            "classes": [[float(v), int(m)] for v, m in report.classes],
            "local_block_diag": [float(v) for v in np.diag(block)],
        }
        write_manifest(manifest, out_dir / "localize_manifest.json")
        print(f"wrote {out_dir / 'localize_manifest.json'}")
    return 0


def _run_reproduce(args) -> int:
    force = "random" if args.figure == "appB" else "spin_chain"
    config = _load_config(args, force_kind=force)
    out_dir = resolve_out_dir(args.out)
    manifest = run_figure(
        args.figure,
        config,
        out_dir,
        threads=args.threads,
        cache_policy=args.cache,
        plot=args.plot,
    )
    print(f"wrote {len(manifest['files'])} dataset file(s) to {out_dir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "spin-chain":
            return _run_system(args, "spin_chain")
        if args.command == "random-system":
            return _run_system(args, "random")
        if args.command == "coeffs":
            return _run_coeffs(args)
        if args.command == "predict":
            return _run_predict(args)
        if args.command == "localize":
            return _run_localize(args)
        if args.command == "reproduce":
            return _run_reproduce(args)
        parser.error(f"unknown command {args.command!r}")
    except ValidationError as exc:
        print(f"ethlab: configuration error: {exc}", file=sys.stderr)
        return 2
    except CacheMissError as exc:
        print(f"ethlab: cache policy failure: {exc}", file=sys.stderr)
        return 4
    except EthlabError as exc:
        print(f"ethlab: compute error: {exc}", file=sys.stderr)
        return 3
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
