"""Command-line pipeline orchestration.

Commands are thin deterministic wrappers over the module operations:
``sample`` and ``stabilizer`` build labeled datasets, ``train`` fits a
predictor, ``predict`` evaluates it into a curve, ``detect`` extracts the
transition, ``fidelity`` computes the reference susceptibility curve,
``scaling`` fits crossover positions against size, ``plot`` renders SVG and
``verify`` runs the oracle cross-check suite.

Exit codes: 0 success, 2 configuration error, 3 runtime error; failures
print a one-line JSON error object to stderr.  All artifact writes stay
inside the directory or file paths named on the command line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import LabeledDataset, concat_datasets
from .detector import (
    derivative_curve,
    find_crossover,
    prediction_curve,
    scaling_fit,
)
from .dos import DosPredictor, dos_fit, load_dos_model, save_dos_model
from .fidelity import chi_f_curve_exact, chi_f_curve_mc, chi_f_peak
from .files import (
    read_dataset,
    read_prediction_curve,
    read_report,
    write_chi_f_curve,
    write_dataset,
    write_derivative_curve,
    write_prediction_curve,
    write_report,
    write_scaling_fit,
    report_to_dict,
)
from .igt import sample_igt_grid
from .manifest import Manifest, ManifestError, load_manifest
from .nn import (
    TrainConfig,
    architecture,
    ensemble_train,
    load_model,
    nn_init,
    nn_train,
    save_model,
)
from .rng import stream_key
from .svgplot import render_curves
from .toric import field_preset, sample_sigma_x, stabilizer_dataset
from .toric_z import sample_sigma_z

TRAIN_ROLE_TAG = 101
EVAL_ROLE_TAG = 102


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("TOPOPROBE_THREADS")
    return max(1, int(env)) if env else 1


def _sample_role(man: Manifest, role: str) -> LabeledDataset:
    betas = man.train_betas if role == "train" else man.eval_betas
    count = man.train_count if role == "train" else man.eval_count
    seed = stream_key(man.master_seed, TRAIN_ROLE_TAG if role == "train" else EVAL_ROLE_TAG)
    s = man.sampler
    if man.model_kind == "igt":
        return sample_igt_grid(
            man.n, betas, count, seed, s["therm_sweeps"], s["stride"], s["chains"]
        )
    lam = field_preset(man.field_preset, man.n)
    if man.model_kind == "toric_x":
        return sample_sigma_x(
            man.n, lam, betas, count, seed, s["therm_sweeps"], s["stride"], s["chains"],
            field_preset_name=man.field_preset,
        )
    if man.model_kind == "toric_z":
        return sample_sigma_z(
            man.n, lam, betas, count, seed, s["therm_sweeps"], s["stride"],
            field_preset_name=man.field_preset,
        )
    return stabilizer_dataset(
        man.n, lam, betas, count, man.stabilizer["mc_samples"], seed,
        s["therm_sweeps"], s["stride"], field_preset_name=man.field_preset,
    )


def _write_role_files(ds: LabeledDataset, man: Manifest, role: str, out_dir: Path):
    stem = f"{man.model_kind}_n{man.n}_{role}"
    for i, beta in enumerate(ds.unique_labels()):
        write_dataset(ds.subset_by_label(float(beta)), out_dir / f"{stem}_b{i:03d}.csv")
    write_dataset(ds, out_dir / f"{stem}_all.csv")


def _emit_manifest(man: Manifest, args):
    if getattr(args, "manifest_out", None):
        Path(args.manifest_out).write_text(man.to_json())


def cmd_sample(args) -> int:
    man = load_manifest(args.manifest)
    if man.model_kind == "stabilizer":
        raise ManifestError("model_kind", "use the stabilizer command for expectation datasets")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for role in ("train", "eval"):
        _write_role_files(_sample_role(man, role), man, role, out_dir)
    _emit_manifest(man, args)
    return 0


def cmd_stabilizer(args) -> int:
    man = load_manifest(args.manifest)
    if man.model_kind != "stabilizer":
        raise ManifestError("model_kind", "stabilizer command needs model_kind 'stabilizer'")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for role in ("train", "eval"):
        _write_role_files(_sample_role(man, role), man, role, out_dir)
    _emit_manifest(man, args)
    return 0


def _load_training_data(man: Manifest, data_dir: Path) -> LabeledDataset:
    path = data_dir / f"{man.model_kind}_n{man.n}_train_all.csv"
    if not path.exists():
        raise FileNotFoundError(f"training data not found: {path}")
    return read_dataset(path)


def _architecture_for(man: Manifest) -> dict:
    label_range = (min(man.train_betas), max(man.train_betas))
    name = man.predictor.get(
        "architecture",
        {"igt": "igt-desk", "toric_x": "toric-x-desk", "toric_z": "toric-z-desk",
         "stabilizer": "stabilizer"}[man.model_kind],
    )
    if isinstance(name, dict):
        return name
    if name == "stabilizer":
        return architecture(name, label_range, input_dim=man.n * man.n)
    return architecture(name, label_range, n=man.n)


def _train_config(man: Manifest, seed: int) -> TrainConfig:
    fields = dict(man.predictor.get("train", {}))
    fields.setdefault("seed", seed)
    return TrainConfig(**fields)


def cmd_train(args) -> int:
    man = load_manifest(args.manifest)
    train = _load_training_data(man, Path(args.data))
    if man.predictor["kind"] == "dos":
        save_dos_model(dos_fit(train), args.out)
        _emit_manifest(man, args)
        return 0
    descriptor = _architecture_for(man)
    if args.ensemble_seeds:
        seeds = [int(s) for s in args.ensemble_seeds.split(",")]
        nets = ensemble_train(
            train, descriptor, _train_config(man, seeds[0]), seeds,
            pool_threads=_threads(args),
        )
        out = Path(args.out)
        for seed, net in zip(seeds, nets):
            save_model(net, out.parent / f"{out.stem}_s{seed}{out.suffix}")
    else:
        seed = args.model_seed if args.model_seed is not None else man.master_seed
        net = nn_init(descriptor, seed)
        net, _ = nn_train(train, net, _train_config(man, seed))
        save_model(net, args.out)
    _emit_manifest(man, args)
    return 0


def _load_predictor(path: Path, n: int):
    with open(path, "rb") as fh:
        magic = fh.read(5)
    if magic == b"TPRB1":
        return load_model(path)
    return DosPredictor(load_dos_model(path, n))


def cmd_predict(args) -> int:
    evalset = read_dataset(args.data)
    model = _load_predictor(Path(args.model), evalset.n)
    write_prediction_curve(prediction_curve(model, evalset), args.out)
    return 0


def cmd_detect(args) -> int:
    curve = read_prediction_curve(args.curve)
    dcurve = derivative_curve(curve)
    report = find_crossover(dcurve, smoothing_window=args.window, method=args.method)
    if args.dcurve_out:
        write_derivative_curve(dcurve, args.dcurve_out)
    payload = report_to_dict(report)
    if args.n is not None:
        payload["n"] = args.n
    Path(args.out).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    print("no peak" if report.no_peak else f"beta_star {report.beta_star!r}")
    return 0


def cmd_fidelity(args) -> int:
    man = load_manifest(args.manifest)
    if man.model_kind == "igt":
        raise ManifestError("model_kind", "fidelity applies to the toric model")
    lam = field_preset(man.field_preset, man.n)
    if man.fidelity["method"] == "exact":
        curve = chi_f_curve_exact(man.n, lam, man.eval_betas)
    else:
        curve = chi_f_curve_mc(
            man.n, lam, man.eval_betas, man.fidelity["mc_samples"],
            stream_key(man.master_seed, 103),
            man.sampler["therm_sweeps"], man.sampler["stride"],
        )
    write_chi_f_curve(curve, args.out)
    print(f"chi_f peak at beta {chi_f_peak(curve)!r}")
    _emit_manifest(man, args)
    return 0


def cmd_scaling(args) -> int:
    sizes, stars = [], []
    for path in args.reports:
        payload = json.loads(Path(path).read_text())
        if "n" not in payload:
            raise ManifestError("<report>", f"{path} lacks the lattice size field 'n'")
        if payload.get("no_peak"):
            raise ManifestError("<report>", f"{path} reports no peak")
        sizes.append(payload["n"])
        stars.append(payload["beta_star"])
    fit = scaling_fit(sizes, stars)
    write_scaling_fit(fit, args.out)
    print(f"slope {fit.slope!r} r_squared {fit.r_squared!r}")
    return 0


def _curve_series(path: Path):
    header = Path(path).read_text().splitlines()[0].split(",")
    label = Path(path).stem
    if header[:2] == ["beta", "mean_pred"]:
        curve = read_prediction_curve(path)
        return label, curve.beta_labels, curve.mean_pred
    if header == ["beta", "d"]:
        from .files import read_derivative_curve

        curve = read_derivative_curve(path)
        return label, curve.beta, curve.d
    if header[:2] == ["beta", "chi_f"]:
        from .files import read_chi_f_curve

        curve = read_chi_f_curve(path)
        return label, curve.beta_grid, curve.chi_values
    raise ManifestError("<curve>", f"{path} has unrecognised columns {header}")


def cmd_plot(args) -> int:
    if not args.curves:
        raise ManifestError("curves", "nothing to plot")
    series = [_curve_series(Path(p)) for p in args.curves]
    refs = []
    for path in args.ref or []:
        report = read_report(path)
        if not report.no_peak:
            refs.append((report.method, report.beta_star))
    svg = render_curves(series, refs, x_label=args.x_label, y_label=args.y_label)
    Path(args.out).write_text(svg)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_verification

    results = run_verification(fast=args.fast)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += 0 if ok else 1
    if failed:
        raise RuntimeError(f"{failed} verification check(s) failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topoprobe",
        description="Detect topological phase transitions with predictive models.",
    )
    parser.add_argument("--version", action="version", version=f"topoprobe {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: TOPOPROBE_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample spin datasets from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest-out", help="write the fully resolved manifest here")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("stabilizer", help="build stabilizer expectation datasets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest-out")
    p.set_defaults(fn=cmd_stabilizer)

    p = sub.add_parser("train", help="fit the manifest's predictor on sampled data")
    p.add_argument("--manifest", required=True)
    p.add_argument("--data", required=True, help="directory produced by sample/stabilizer")
    p.add_argument("--out", required=True, help="model file (.tprb for networks, .csv for dos)")
    p.add_argument("--model-seed", type=int, default=None)
    p.add_argument("--ensemble-seeds", help="comma list: train one model per seed")
    p.add_argument("--manifest-out")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="evaluate a model into a prediction curve")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="evaluation dataset (csv body)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("detect", help="extract the transition from a prediction curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--out", required=True, help="transition report JSON")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--method", default="nn")
    p.add_argument("--n", type=int, default=None, help="lattice size recorded in the report")
    p.add_argument("--dcurve-out", help="also write the derivative curve CSV")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("fidelity", help="fidelity-susceptibility reference curve")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest-out")
    p.set_defaults(fn=cmd_fidelity)

    p = sub.add_parser("scaling", help="fit beta_star against ln(2 N^2)")
    p.add_argument("--out", required=True)
    p.add_argument("reports", nargs="+")
    p.set_defaults(fn=cmd_scaling)

    p = sub.add_parser("plot", help="render curves (and reference lines) to SVG")
    p.add_argument("--out", required=True)
    p.add_argument("--ref", action="append", help="transition report JSON for a dashed line")
    p.add_argument("--x-label", default="beta")
    p.add_argument("--y-label", default="value")
    p.add_argument("curves", nargs="*")
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("verify", help="run the oracle cross-check suite")
    p.add_argument("--fast", action="store_true", help="reduced sample counts")
    p.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ManifestError as exc:
        print(json.dumps({"error": {"type": "config", "field": exc.field_path,
                                    "message": str(exc)}}), file=sys.stderr)
        return 2
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": {"type": "config", "message": str(exc)}}), file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures keep a machine-readable trail
        print(json.dumps({"error": {"type": "runtime", "message": str(exc)}}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
