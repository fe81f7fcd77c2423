"""Command-line pipeline: gen-data / train / spectrum / filter / attack / defend / eval.

Every command writes its outputs plus a single manifest.json (command, full
config snapshot, seed, relative artifact paths, tool version) into --out, so
re-running the recorded configuration reproduces the outputs bitwise. Errors
are emitted to stderr as single-line JSON; exit codes: 0 ok, 1 usage error,
2 runtime failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attack import AttackConfig, binary_search_beta, run_attack
from .classifier import load_model, save_model, train
from .cloud import load_xyz, save_xyz
from .defense import (
    DefenseConfig,
    evaluate_under_defense,
    train_with_lowpass_augmentation,
)
from .graph import build_knn_graph, laplacian
from .metrics import DistortionReport, distortion_report
from .rng import stage_rng
from .spectral import (
    default_band_split,
    eigendecompose,
    gft,
    ideal_band_response,
    apply_response,
    igft,
    write_spectrum_csv,
)
from .synthetic import CLASS_NAMES, gen_synthetic


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config_snapshot(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "config")}


def _write_manifest(outdir: Path, command: str, args, artifacts):
    manifest = {
        "command": command,
        "config": _config_snapshot(args),
        "seed": getattr(args, "seed", None),
        "artifacts": sorted(str(a) for a in artifacts),
        "version": __version__,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_flat_toml(text: str) -> dict:
    """Flat `key = value` tables: strings, numbers, booleans. Enough for
    config files here without requiring Python 3.11's tomllib."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if value.startswith(("'", '"')) and value.endswith(value[0]) and len(value) >= 2:
            out[key] = value[1:-1]
        elif value in ("true", "false"):
            out[key] = value == "true"
        else:
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    raise UsageError(f"config line {lineno}: cannot parse {value!r}") from None
    return out


def _load_config_file(path):
    text = Path(path).read_text()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            return _parse_flat_toml(text)
        return tomllib.loads(text)
    return json.loads(text)


def _load_dataset_dir(data_dir: Path):
    """Clouds and labels as written by gen-data (labels.csv + .xyz files)."""
    labels_file = data_dir / "labels.csv"
    if not labels_file.exists():
        raise FileNotFoundError(f"{labels_file} not found")
    files, labels = [], []
    with open(labels_file) as fh:
        header = fh.readline()
        if header.strip() != "file,label,class_name":
            raise ValueError(f"{labels_file}: unexpected header {header.strip()!r}")
        for line in fh:
            name, label, _ = line.strip().split(",")
            files.append(name)
            labels.append(int(label))
    clouds = np.stack([load_xyz(data_dir / name) for name in files])
    return clouds, np.array(labels, dtype=np.int64), files


# subcommands -------------------------------------------------------------


def cmd_gen_data(args):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ds = gen_synthetic(args.per_class, args.points, args.seed, jitter=args.jitter)
    artifacts = []
    with open(outdir / "labels.csv", "w") as fh:
        fh.write("file,label,class_name\n")
        for i, sample in enumerate(ds.samples):
            name = f"cloud_{i:04d}.xyz"
            save_xyz(outdir / name, sample.points)
            fh.write(f"{name},{sample.label},{CLASS_NAMES[sample.label]}\n")
            artifacts.append(name)
    artifacts.append("labels.csv")
    _write_manifest(outdir, "gen-data", args, artifacts)
    return 0


def cmd_train(args):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    clouds, labels, _ = _load_dataset_dir(Path(args.data))

    class _ArrayDataset:
        class_names = CLASS_NAMES

        def points_array(self):
            return clouds

        def labels_array(self):
            return labels

    model, report = train(
        _ArrayDataset(), hidden=args.hidden, epochs=args.epochs, lr=args.lr,
        momentum=args.momentum, batch_size=args.batch_size, seed=args.seed,
        holdout_frac=args.holdout_frac,
    )
    save_model(model, outdir / "model.json")
    with open(outdir / "train_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(outdir, "train", args, ["model.json", "train_report.json"])
    return 0


def cmd_spectrum(args):
    points = load_xyz(args.infile)
    eig = eigendecompose(laplacian(build_knn_graph(points, args.k)))
    write_spectrum_csv(eig, gft(points, eig), args.out)
    return 0


def _keep_indices(args, n: int):
    if args.keep == "custom":
        if not args.bands:
            raise UsageError("--keep custom requires --bands like 0:100,400:512")
        keep = []
        for chunk in args.bands.split(","):
            lo, hi = chunk.split(":")
            keep.extend(range(int(lo), int(hi)))
        return keep
    split = default_band_split(n)
    return {
        "low": range(0, split.low_end),
        "mid": range(split.low_end, split.mid_end),
        "high": range(split.mid_end, n),
    }[args.keep]


def cmd_filter(args):
    if args.keep == "custom" and not args.bands:
        raise UsageError("--keep custom requires --bands like 0:100,400:512")
    points = load_xyz(args.infile)
    eig = eigendecompose(laplacian(build_knn_graph(points, args.k)))
    response = ideal_band_response(eig.n, _keep_indices(args, eig.n))
    save_xyz(args.out, igft(apply_response(gft(points, eig), response)))
    return 0


def _parse_mode(mode: str):
    if mode == "untargeted":
        return "untargeted", None
    if mode.startswith("targeted:"):
        return "targeted", int(mode.split(":", 1)[1])
    raise UsageError(f"--mode must be 'untargeted' or 'targeted:<label>', got {mode!r}")


def _attack_one(task):
    clouds, labels, cfg, model, use_search, i = task
    points, y = clouds[i], int(labels[i])
    if cfg.mode == "targeted" and cfg.target == y:
        return i, None
    attack_fn = binary_search_beta if use_search else run_attack
    return i, attack_fn(points, y, cfg, model)


def cmd_attack(args):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    clouds, labels, _ = _load_dataset_dir(Path(args.data))
    model = load_model(args.model)
    mode, target = _parse_mode(args.mode)
    cfg = AttackConfig(
        mode=mode, target=target, epsilon=args.eps, iters=args.iters, lr=args.lr,
        beta1=args.beta1, beta2=args.beta2, poly_len=args.poly_len, k=args.k,
        binary_search_steps=args.binary_search, seed=args.seed,
    )

    correct = [i for i in range(len(labels)) if model.predict(clouds[i]) == labels[i]]
    rng = stage_rng(args.seed, "attack/sample-select")
    chosen = (rng.permutation(correct)[: args.samples].tolist()
              if args.samples and args.samples < len(correct) else correct)

    tasks = [(clouds, labels, cfg, model, args.binary_search > 0, i) for i in chosen]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_attack_one, tasks))
    else:
        outcomes = [_attack_one(t) for t in tasks]

    artifacts = []
    records = []
    n_success = 0
    for rank, (i, result) in enumerate(outcomes):
        stem = f"sample_{rank:04d}"
        record = {"index": int(i), "true_label": int(labels[i]), "mode": mode, "target": target}
        if result is None:
            record["error"] = "target equals true label; sample skipped"
        else:
            save_xyz(outdir / f"{stem}_clean.xyz", clouds[i])
            save_xyz(outdir / f"{stem}_adv.xyz", result.adversarial)
            artifacts += [f"{stem}_clean.xyz", f"{stem}_adv.xyz"]
            record.update(result.to_dict())
            n_success += result.success
            if args.trace:
                trace_name = f"{stem}_trace.csv"
                with open(outdir / trace_name, "w") as fh:
                    fh.write("iteration,loss,e_delta\n")
                    for it, (loss, e_delta) in enumerate(result.trace):
                        fh.write(f"{it},{float(loss)!r},{float(e_delta)!r}\n")
                artifacts.append(trace_name)
        with open(outdir / f"{stem}.json", "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
        artifacts.append(f"{stem}.json")
        records.append(record)

    attacked = [r for r in records if "error" not in r]
    summary = {
        "samples_attacked": len(attacked),
        "successes": n_success,
        "success_rate": n_success / len(attacked) if attacked else 0.0,
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    artifacts.append("summary.json")
    _write_manifest(outdir, "attack", args, artifacts)
    return 0


def _load_attack_pairs(attacked_dir: Path):
    pairs = []
    for record_file in sorted(attacked_dir.glob("sample_*.json")):
        if record_file.name.endswith("_trace.json"):
            continue
        record = json.loads(record_file.read_text())
        stem = record_file.stem
        adv_file = attacked_dir / f"{stem}_adv.xyz"
        clean_file = attacked_dir / f"{stem}_clean.xyz"
        if "error" in record or not adv_file.exists():
            continue
        pairs.append({
            "stem": stem,
            "clean": load_xyz(clean_file),
            "adv": load_xyz(adv_file),
            "label": int(record["true_label"]),
            "success": bool(record.get("success", False)),
        })
    if not pairs:
        raise ValueError(f"no attack records found in {attacked_dir}")
    return pairs


def cmd_defend(args):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    pairs = _load_attack_pairs(Path(args.attacked))
    model = load_model(args.model)
    records = [(p["adv"], p["label"]) for p in pairs if p["success"]]
    if not records:
        raise ValueError("no successful attacks to defend against")

    params = [float(x) for x in args.params.split(",")] if args.params else [None]
    defended_model = None
    if args.kind == "lowpass":
        if not args.data:
            raise UsageError("--kind lowpass needs --data to retrain the victim")
        clouds, labels, _ = _load_dataset_dir(Path(args.data))

        class _ArrayDataset:
            class_names = CLASS_NAMES

            def points_array(self):
                return clouds

            def labels_array(self):
                return labels

        defended_model, defended_report = train_with_lowpass_augmentation(
            _ArrayDataset(), b_fraction=args.b_fraction, k=args.k,
            hidden=args.hidden, epochs=args.epochs, lr=args.train_lr,
            seed=args.seed,
        )
        with open(outdir / "defended_train_report.json", "w") as fh:
            json.dump(defended_report, fh, indent=2, sort_keys=True)
            fh.write("\n")

    rows = []
    for param in params:
        if args.kind == "lowpass":
            cfg = DefenseConfig(kind="lowpass_retrain", b_fraction=args.b_fraction,
                                k=args.k, seed=args.seed)
            label = f"b_fraction={args.b_fraction}"
        elif args.kind == "srs":
            cfg = DefenseConfig(kind="srs", drop_fraction=param if param is not None else 0.1,
                                seed=args.seed)
            label = f"drop={cfg.drop_fraction}"
        elif args.kind == "sor":
            cfg = DefenseConfig(kind="sor", sor_m=param if param is not None else 1.0,
                                sor_k=args.sor_k, seed=args.seed)
            label = f"m={cfg.sor_m}"
        elif args.kind == "gaussian":
            cfg = DefenseConfig(kind="gaussian",
                                noise_fraction=param if param is not None else 0.01,
                                seed=args.seed)
            label = f"noise={cfg.noise_fraction}"
        else:
            raise UsageError(f"unknown defense kind {args.kind!r}")
        rate = evaluate_under_defense(records, cfg, model, defended_model=defended_model)
        rows.append((args.kind, label, rate))

    csv_path = outdir / "defense_eval.csv"
    with open(csv_path, "w") as fh:
        fh.write("defense,parameter,success_rate\n")
        for kind, label, rate in rows:
            fh.write(f"{kind},{label},{rate!r}\n")
    artifacts = ["defense_eval.csv"]
    if args.kind == "lowpass":
        artifacts.append("defended_train_report.json")
    _write_manifest(outdir, "defend", args, artifacts)
    return 0


def cmd_eval(args):
    pairs = _load_attack_pairs(Path(args.pairs))
    out = Path(args.out)
    with open(out, "w") as fh:
        fh.write("pair," + DistortionReport.csv_header() + "\n")
        for p in pairs:
            eig = eigendecompose(laplacian(build_knn_graph(p["clean"], args.k)))
            report = distortion_report(p["adv"], p["clean"], eig, k=args.k)
            fh.write(f"{p['stem']}," + report.csv_row() + "\n")
    return 0


# parser ------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="pointspec", description=__doc__)
    parser.add_argument("--config", default=None,
                        help="JSON or TOML file of defaults, overridden by flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic labeled dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--points", type=int, default=256)
    p.add_argument("--jitter", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the classifier on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--holdout-frac", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("spectrum", help="per-frequency energy CSV for one cloud")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("filter", help="reconstruct a cloud from selected bands")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--keep", choices=["low", "mid", "high", "custom"], required=True)
    p.add_argument("--bands", default=None, help="custom index ranges, e.g. 0:100,400:512")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("attack", help="attack correctly-classified dataset samples")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="untargeted", help="untargeted | targeted:<label>")
    p.add_argument("--eps", type=float, default=1.5)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--beta1", type=float, default=10.0)
    p.add_argument("--beta2", type=float, default=1.0)
    p.add_argument("--poly-len", type=int, default=5)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--binary-search", type=int, default=0,
                   help="outer beta1 search steps (0 = single run)")
    p.add_argument("--samples", type=int, default=0, help="cap on samples (0 = all)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trace", action="store_true", help="write per-iteration CSV traces")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("defend", help="evaluate a defense against attack outputs")
    p.add_argument("--attacked", required=True, help="attack output directory")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=["lowpass", "srs", "sor", "gaussian"], required=True)
    p.add_argument("--params", default=None, help="comma list, e.g. 0.05,0.1,0.2")
    p.add_argument("--data", default=None, help="dataset dir (lowpass retraining)")
    p.add_argument("--b-fraction", type=float, default=400.0 / 1024.0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--sor-k", type=int, default=2)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--train-lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_defend)

    p = sub.add_parser("eval", help="distortion report table for (clean, adv) pairs")
    p.add_argument("--pairs", required=True, help="directory of attack outputs")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def _apply_config_file(parser, argv):
    """Config file values become defaults; explicit flags still win."""
    probe = _Parser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    config = _load_config_file(known.config)
    if not isinstance(config, dict):
        raise UsageError(f"{known.config}: expected a table of key/value pairs")
    normalized = {k.replace("-", "_"): v for k, v in config.items()}
    subparsers = parser._subparsers._group_actions[0].choices.values()
    all_dests = set().union(*({a.dest for a in sp._actions} for sp in subparsers))
    unknown = set(normalized) - all_dests
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for sp in subparsers:
        for action in sp._actions:
            if action.dest in normalized:
                action.required = False  # a config value satisfies required flags
        dests = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in normalized.items() if k in dests})
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": str(exc), "kind": "usage"}), file=sys.stderr)
        return 1
    except Exception as exc:  # runtime/numerical failure
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}), file=sys.stderr)
        return 2


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
