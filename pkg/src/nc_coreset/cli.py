"""Command-line front door for the sampling pipeline.

Subcommands compose the full method: synthesize or extract embeddings, filter
correctly-classified samples, inspect class geometry, sample each class, merge,
retrain the toy classifier, evaluate. Every artifact lands under ``--out`` with
a fixed name (``manifest.csv``, ``geometry.json``, ``metrics.json``,
``projection.csv``, ``model.json``, plus ``.nceb`` tables), every JSON report
embeds the resolved config including the seed, and re-running a subcommand
with identical inputs and seed reproduces every artifact byte for byte.

Config values resolve flag > config file (flat ``key=value`` lines) > the
``NC_CORESET_SEED`` environment variable (seed only) > built-in default.

Exit codes: 0 success; 2 usage or config errors; 3 malformed or unreadable
input files; 4 data errors (empty class, degenerate geometry, single-class
scores, ...); 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from nc_coreset import collapse, embedding_io, eval_metrics, sampler, toy_model
from nc_coreset import features as features_mod
from nc_coreset.embedding_io import EmbeddingTable, Label, ScoreTable
from nc_coreset.errors import (
    BadMagic,
    CorruptFile,
    DimensionMismatch,
    DuplicateSampleId,
    InvalidConfig,
    InvariantViolation,
    IoFailure,
    MalformedRow,
    NcCoresetError,
    NonFiniteValue,
    TruncatedFile,
    UnknownLabelToken,
    UnsupportedFormat,
    VersionMismatch,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_DATA = 4
EXIT_UNEXPECTED = 1

_FORMAT_ERRORS = (
    BadMagic,
    VersionMismatch,
    TruncatedFile,
    DimensionMismatch,
    NonFiniteValue,
    DuplicateSampleId,
    InvariantViolation,
    MalformedRow,
    UnknownLabelToken,
    IoFailure,
    CorruptFile,
    UnsupportedFormat,
)

SEED_ENV = "NC_CORESET_SEED"

_EPILOG = """\
exit codes:
  0  success
  2  usage or config error
  3  malformed input file (bad magic/version, truncation, bad CSV, duplicate ids)
  4  data error (empty class, degenerate geometry, single-class scores, ...)
  1  unexpected failure
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nc-coreset",
        description="Neural-collapse coreset sampling toolkit",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *names: str) -> None:
        if "input" in names:
            p.add_argument("--input", help="input embedding table (.nceb)")
        if "scores" in names:
            p.add_argument("--scores", help="score CSV (sample_id,label,score)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="flat key=value config file; flags win")
        if "rule" in names:
            p.add_argument("--rule", choices=["threshold", "top-fraction", "top-count"])
            p.add_argument("--value", help="rule parameter (float or int)")
        if "seed" in names:
            p.add_argument("--seed", help="u64 seed (env NC_CORESET_SEED as fallback)")

    p = sub.add_parser("synth", help="generate a synthetic embedding table")
    common(p, "seed")
    p.add_argument("--dimension", help="embedding dimension (default 16)")
    p.add_argument("--n-real", help="real sample count (default 2000)")
    p.add_argument("--n-fake", help="fake sample count (default 14000)")
    p.add_argument("--fake-modes", help="fake mixture component count (default 7)")
    p.add_argument("--separation", help="mode distance from the real anchor (default 6.0)")
    p.add_argument("--within-std", help="within-mode standard deviation (default 1.0)")

    p = sub.add_parser("extract-features", help="log-mel features for a WAV manifest")
    common(p)
    p.add_argument("--input", required=True, help="manifest CSV (path,label,algorithm_id)")

    p = sub.add_parser("interest", help="keep correctly classified samples")
    common(p, "input", "scores")

    p = sub.add_parser("geometry", help="collapse statistics and 2-D projection")
    common(p, "input")

    p = sub.add_parser("sample-real", help="class-mean sampling of one class")
    common(p, "input", "rule")
    p.add_argument("--class", dest="class_label", choices=["real", "fake"], default="real")

    p = sub.add_parser("sample-fake", help="cluster-wise sampling of the fake class")
    common(p, "input", "rule", "seed")
    p.add_argument("--k-max", help="maximum cluster count")
    p.add_argument("--overlap-mode", choices=["exclude", "merged"])

    p = sub.add_parser("sample-random", help="random per-class baseline")
    common(p, "input", "seed")
    p.add_argument("--value", help="samples per class")

    p = sub.add_parser("merge", help="merge two selection manifests")
    p.add_argument("manifests", nargs=2, help="two manifest CSVs with disjoint ids")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="flat key=value config file; flags win")

    p = sub.add_parser("train-toy", help="train the linear toy classifier")
    common(p, "input", "seed")
    p.add_argument("--epochs", help="training epochs (default 300)")
    p.add_argument("--lr", help="learning rate (default 0.5)")

    p = sub.add_parser("eval", help="EER-ROC / mAP / AUC for a score CSV")
    common(p, "scores")

    p = sub.add_parser("pipeline", help="synthetic end-to-end run (full vs sampled)")
    common(p, "rule", "seed")
    p.add_argument("--dimension")
    p.add_argument("--n-real")
    p.add_argument("--n-fake")
    p.add_argument("--fake-modes")
    p.add_argument("--separation")
    p.add_argument("--within-std")
    p.add_argument("--k-max")
    p.add_argument("--overlap-mode", choices=["exclude", "merged"])
    p.add_argument("--real-fraction", help="top-fraction applied to the real class (default 1.0)")
    p.add_argument("--epochs")
    p.add_argument("--lr")

    return parser


class Resolver:
    """Flag > config file > environment (seed only) > built-in default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file_values: dict[str, str] = {}
        self.resolved: dict[str, object] = {}
        if getattr(args, "config", None):
            self.file_values = _parse_config_file(args.config)

    def get(self, key: str, default, cast):
        flag = getattr(self.args, key, None)
        if flag is not None:
            value = flag
        elif key in self.file_values:
            value = self.file_values[key]
        elif key == "seed" and os.environ.get(SEED_ENV):
            value = os.environ[SEED_ENV]
        else:
            value = default
        if value is None:
            raise InvalidConfig(f"missing required setting {key!r}")
        try:
            value = cast(value)
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad value for {key!r}: {value!r}") from exc
        self.resolved[key] = value
        return value


def _parse_config_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _parse_seed(value) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed {seed} outside u64 range")
    return seed


def _rule_from(resolver: Resolver, default_kind: str | None = None, default_value=None):
    kind = resolver.get("rule", default_kind, str)
    value = resolver.get("value", default_value, float)
    if kind == "threshold":
        return sampler.SamplingRule.threshold(value)
    if kind == "top-fraction":
        return sampler.SamplingRule.top_fraction(value)
    if kind == "top-count":
        if value != int(value):
            raise InvalidConfig(f"top-count needs an integer value, got {value}")
        return sampler.SamplingRule.top_count(int(value))
    raise InvalidConfig(f"unknown rule {kind!r}")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _floats(vec: np.ndarray) -> list[float]:
    return [float(v) for v in vec]


# --- subcommands --------------------------------------------------------------


def _cmd_synth(args: argparse.Namespace) -> int:
    r = Resolver(args)
    cfg = toy_model.SyntheticConfig(
        dimension=r.get("dimension", 16, int),
        n_real=r.get("n_real", 2000, int),
        n_fake=r.get("n_fake", 14000, int),
        fake_modes=r.get("fake_modes", 7, int),
        mode_separation=r.get("separation", 6.0, float),
        within_std=r.get("within_std", 1.0, float),
        seed=r.get("seed", 0, _parse_seed),
    )
    out = _out_dir(args)
    embedding_io.store_table(toy_model.generate_synthetic(cfg), out / "synthetic.nceb")
    return EXIT_OK


def _cmd_extract_features(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    rows = _read_wav_manifest(args.input)
    records = []
    dimension = None
    for path, label, algorithm_id in rows:
        mel = features_mod.melspectrogram(features_mod.load_wav(path))
        flat = mel.values.astype(np.float32).reshape(-1)  # row-major: band-by-band
        if dimension is None:
            dimension = flat.shape[0]
        elif flat.shape[0] != dimension:
            raise DimensionMismatch(f"{path}: feature length {flat.shape[0]} != {dimension}")
        records.append(embedding_io.EmbeddingRecord(path, label, algorithm_id, flat))
    if dimension is None:
        raise InvalidConfig(f"{args.input}: manifest lists no files")
    table = EmbeddingTable(dimension=dimension, records=tuple(records))
    embedding_io.store_table(table, out / "features.nceb")
    return EXIT_OK


def _read_wav_manifest(path: str) -> list[tuple[str, Label, int]]:
    import csv

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or rows[0] != ["path", "label", "algorithm_id"]:
        raise MalformedRow(f"{path}: expected header path,label,algorithm_id")
    out = []
    for lineno, cells in enumerate(rows[1:], start=2):
        if len(cells) != 3:
            raise MalformedRow(f"{path}:{lineno}: expected 3 columns")
        wav_path, label_token, algo_text = cells
        try:
            algorithm_id = int(algo_text)
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: bad algorithm_id {algo_text!r}") from exc
        out.append((wav_path, Label.from_token(label_token), algorithm_id))
    return out


def _cmd_interest(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    table = embedding_io.load_table(args.input)
    scores = embedding_io.read_score_table(args.scores)
    kept = collapse.samples_of_interest(table, scores)
    embedding_io.store_table(kept, out / "interest.nceb")
    return EXIT_OK


def _pca_projection(table: EmbeddingTable) -> list[tuple[str, Label, float, float]]:
    """Top-2 PCA with a deterministic sign convention (largest component positive)."""
    x = table.matrix()
    centered = x - x.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / max(x.shape[0], 1)
    _, vecs = np.linalg.eigh(cov)
    axes = []
    for col in (-1, -2):
        if x.shape[1] + col < 0:
            axes.append(np.zeros(x.shape[1]))
            continue
        v = vecs[:, col]
        peak = int(np.argmax(np.abs(v)))
        axes.append(-v if v[peak] < 0.0 else v)
    coords = centered @ np.stack(axes, axis=1)
    return [
        (rec.sample_id, rec.label, float(coords[i, 0]), float(coords[i, 1]))
        for i, rec in enumerate(table.records)
    ]


def _cmd_geometry(args: argparse.Namespace) -> int:
    r = Resolver(args)
    out = _out_dir(args)
    table = embedding_io.load_table(args.input)
    geom = collapse.geometry(table)
    _write_json(
        out / "geometry.json",
        {
            "config": _report_config(r, args),
            "mu_real": _floats(geom.mu_real),
            "mu_fake": _floats(geom.mu_fake),
            "n_real": geom.n_real,
            "n_fake": geom.n_fake,
            "tr_sw": geom.within_class_scatter_trace,
            "tr_sb": geom.between_class_scatter_trace,
            "nc1": geom.nc1,
        },
    )
    lines = ["sample_id,label,x,y"]
    lines.extend(
        f"{sid},{label.token},{x!r},{y!r}" for sid, label, x, y in _pca_projection(table)
    )
    (out / "projection.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _report_config(resolver: Resolver, args: argparse.Namespace) -> dict:
    # semantic inputs only: the output directory is where the report already
    # sits, and embedding it would break byte-identity across out dirs
    if "seed" not in resolver.resolved:
        resolver.get("seed", 0, _parse_seed)  # reports always carry the seed
    cfg = {"command": args.command}
    for key in ("input", "scores"):
        if getattr(args, key, None) is not None:
            cfg[key] = str(getattr(args, key))
    cfg.update({k: v for k, v in sorted(resolver.resolved.items())})
    return cfg


def _cmd_sample_real(args: argparse.Namespace) -> int:
    r = Resolver(args)
    rule = _rule_from(r)
    label = Label.from_token(args.class_label)
    out = _out_dir(args)
    table = embedding_io.load_table(args.input)
    manifest = sampler.select_class(table, label, rule)
    embedding_io.write_manifest(manifest, out / "manifest.csv")
    return EXIT_OK


def _cmd_sample_fake(args: argparse.Namespace) -> int:
    r = Resolver(args)
    rule = _rule_from(r)
    k_max = r.get("k_max", None, int)
    seed = r.get("seed", 0, _parse_seed)
    mode = sampler.OverlapMode(r.get("overlap_mode", "exclude", str))
    out = _out_dir(args)
    table = embedding_io.load_table(args.input)
    manifest = sampler.sample_fake_class(table, rule, k_max, seed, mode)
    embedding_io.write_manifest(manifest, out / "manifest.csv")
    return EXIT_OK


def _int_strict(value) -> int:
    number = float(value)
    if number != int(number):
        raise ValueError(f"{value!r} is not an integer")
    return int(number)


def _cmd_sample_random(args: argparse.Namespace) -> int:
    r = Resolver(args)
    n_per_class = r.get("value", None, _int_strict)
    seed = r.get("seed", 0, _parse_seed)
    out = _out_dir(args)
    table = embedding_io.load_table(args.input)
    manifest = sampler.select_random(table, n_per_class, seed)
    embedding_io.write_manifest(manifest, out / "manifest.csv")
    return EXIT_OK


def _cmd_merge(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    first = embedding_io.read_manifest(args.manifests[0])
    second = embedding_io.read_manifest(args.manifests[1])
    embedding_io.write_manifest(sampler.merge_manifests(first, second), out / "manifest.csv")
    return EXIT_OK


def _cmd_train_toy(args: argparse.Namespace) -> int:
    r = Resolver(args)
    epochs = r.get("epochs", 300, int)
    lr = r.get("lr", 0.5, float)
    seed = r.get("seed", 0, _parse_seed)
    out = _out_dir(args)
    table = embedding_io.load_table(args.input)
    model = toy_model.train_linear(table, epochs=epochs, lr=lr, seed=seed)
    _write_json(
        out / "model.json",
        {
            "config": _report_config(r, args),
            "w": _floats(model.weights),
            "b": model.bias,
            "loss": list(model.training_log),
        },
    )
    return EXIT_OK


def _metrics_payload(scores: ScoreTable) -> dict:
    curve = eval_metrics.roc_curve(scores)
    return {
        "eer_roc": eval_metrics.eer_roc(scores),
        "map": eval_metrics.mean_average_precision(scores),
        "auc": curve.auc,
        "n_real": sum(1 for row in scores.rows if row.label is Label.REAL),
        "n_fake": sum(1 for row in scores.rows if row.label is Label.FAKE),
    }


def _cmd_eval(args: argparse.Namespace) -> int:
    r = Resolver(args)
    out = _out_dir(args)
    scores = embedding_io.read_score_table(args.scores)
    payload = _metrics_payload(scores)
    payload["config"] = _report_config(r, args)
    _write_json(out / "metrics.json", payload)
    return EXIT_OK


def _subtable(table: EmbeddingTable, ids: set[str]) -> EmbeddingTable:
    return EmbeddingTable(
        dimension=table.dimension,
        records=tuple(rec for rec in table.records if rec.sample_id in ids),
    )


def _cmd_pipeline(args: argparse.Namespace) -> int:
    r = Resolver(args)
    seed = r.get("seed", 42, _parse_seed)
    cfg = toy_model.SyntheticConfig(
        dimension=r.get("dimension", 16, int),
        n_real=r.get("n_real", 2000, int),
        n_fake=r.get("n_fake", 14000, int),
        fake_modes=r.get("fake_modes", 7, int),
        mode_separation=r.get("separation", 6.0, float),
        within_std=r.get("within_std", 1.0, float),
        seed=seed,
    )
    fake_rule = _rule_from(r, default_kind="top-fraction", default_value=0.5)
    real_fraction = r.get("real_fraction", 1.0, float)
    k_max = r.get("k_max", cfg.fake_modes, int)
    mode = sampler.OverlapMode(r.get("overlap_mode", "exclude", str))
    epochs = r.get("epochs", 300, int)
    lr = r.get("lr", 0.5, float)
    out = _out_dir(args)

    train_table = toy_model.generate_synthetic(cfg)
    # held-out draw: identical config, next seed
    eval_cfg = toy_model.SyntheticConfig(
        dimension=cfg.dimension,
        n_real=cfg.n_real,
        n_fake=cfg.n_fake,
        fake_modes=cfg.fake_modes,
        mode_separation=cfg.mode_separation,
        within_std=cfg.within_std,
        seed=seed + 1,
    )
    eval_table = toy_model.generate_synthetic(eval_cfg)
    embedding_io.store_table(train_table, out / "synthetic_train.nceb")
    embedding_io.store_table(eval_table, out / "synthetic_eval.nceb")

    model_full = toy_model.train_linear(train_table, epochs=epochs, lr=lr, seed=seed)
    train_scores = toy_model.predict_scores(model_full, train_table)
    embedding_io.write_score_table(train_scores, out / "scores_train.csv")

    interest = collapse.samples_of_interest(train_table, train_scores)
    embedding_io.store_table(interest, out / "interest.nceb")

    real_manifest = sampler.select_class(
        interest, Label.REAL, sampler.SamplingRule.top_fraction(real_fraction)
    )
    fake_manifest = sampler.sample_fake_class(interest, fake_rule, k_max, seed, mode)
    embedding_io.write_manifest(real_manifest, out / "manifest_real.csv")
    embedding_io.write_manifest(fake_manifest, out / "manifest_fake.csv")
    merged = sampler.merge_manifests(real_manifest, fake_manifest)
    embedding_io.write_manifest(merged, out / "manifest.csv")

    sampled_table = _subtable(train_table, set(merged.sample_ids()))
    model_sampled = toy_model.train_linear(sampled_table, epochs=epochs, lr=lr, seed=seed)
    _write_json(
        out / "model.json",
        {
            "config": _report_config(r, args),
            "w": _floats(model_sampled.weights),
            "b": model_sampled.bias,
            "loss": list(model_sampled.training_log),
        },
    )

    metrics = {"config": _report_config(r, args)}
    for name, model in (("full", model_full), ("sampled", model_sampled)):
        scores = toy_model.predict_scores(model, eval_table)
        embedding_io.write_score_table(scores, out / f"scores_eval_{name}.csv")
        metrics[name] = _metrics_payload(scores)
    metrics["n_train_full"] = len(train_table)
    metrics["n_train_sampled"] = len(sampled_table)
    metrics["sampled_fraction"] = len(sampled_table) / len(train_table)
    _write_json(out / "metrics.json", metrics)
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "extract-features": _cmd_extract_features,
    "interest": _cmd_interest,
    "geometry": _cmd_geometry,
    "sample-real": _cmd_sample_real,
    "sample-fake": _cmd_sample_fake,
    "sample-random": _cmd_sample_random,
    "merge": _cmd_merge,
    "train-toy": _cmd_train_toy,
    "eval": _cmd_eval,
    "pipeline": _cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InvalidConfig as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _FORMAT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NcCoresetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())
