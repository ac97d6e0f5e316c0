#!/usr/bin/env python3
"""Regenerate the exporter golden fixtures.

Builds a deterministic toy checkpoint and WAV set in a scratch directory, runs
the exporter over them, writes the score/cluster fixtures, and runs the oracle
suite. Outputs land in exporter/fixtures/ and are mirrored into the main
package's tests/fixtures/. Fixtures are versioned artifacts: regenerate only
when the export pipeline intentionally changes.
"""

from __future__ import annotations

import shutil
import sys
import tempfile
import wave
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from nc_export.export import ExportJob, export_embeddings  # noqa: E402
from nc_export.oracles import oracle_suite  # noqa: E402

EXPORTER_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = EXPORTER_ROOT / "fixtures"
PRIMARY_FIXTURES = EXPORTER_ROOT.parent / "tests" / "fixtures"

INPUT_LEN = 1600
CHECKPOINT_SEED = 20240817
SCORE_SEED = 1123
CLUSTER_SEED = 7


def write_tone(path: Path, freq: float, n: int = 2000) -> None:
    t = np.arange(n) / 16000.0
    pcm = (0.5 * np.sin(2 * np.pi * freq * t) * 32767).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(16000)
        handle.writeframes(pcm.tobytes())


def build_checkpoint(path: Path) -> None:
    rng = np.random.Generator(np.random.PCG64(CHECKPOINT_SEED))
    sizes = [INPUT_LEN, 12, 8, 1]
    arrays = {"input_len": np.asarray(INPUT_LEN)}
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        arrays[f"W{i}"] = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        arrays[f"b{i}"] = 0.1 * rng.standard_normal(fan_out)
    np.savez(path, **arrays)


def build_wavs_and_manifest(work: Path) -> Path:
    rows = ["path,label,algorithm_id"]
    real_freqs = [200.0, 230.0, 260.0, 290.0, 320.0]
    fake_freqs = [1000.0, 1200.0, 1400.0, 1600.0, 1800.0]
    for i, freq in enumerate(real_freqs):
        wav = work / f"real_{i}.wav"
        write_tone(wav, freq)
        rows.append(f"{wav},real,0")
    for i, freq in enumerate(fake_freqs):
        wav = work / f"fake_{i}.wav"
        write_tone(wav, freq)
        rows.append(f"{wav},fake,{1 + i % 3}")
    manifest = work / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return manifest


def relativize_nceb_ids(nceb_path: Path, work: Path) -> None:
    """Strip the scratch directory from sample ids so the fixture is stable."""
    from nc_export.format import Record, read_nceb, write_nceb

    dimension, records = read_nceb(nceb_path)
    renamed = [
        Record(str(Path(r.sample_id).name), r.label, r.algorithm_id, r.embedding)
        for r in records
    ]
    write_nceb(nceb_path, dimension, renamed)


def build_scores_csv(path: Path) -> None:
    rng = np.random.Generator(np.random.PCG64(SCORE_SEED))
    lines = ["sample_id,label,score"]
    for i in range(40):
        label = "fake" if i % 2 else "real"
        center = 0.65 if label == "fake" else 0.35
        score = float(np.round(np.clip(center + 0.3 * rng.standard_normal(), 0, 1), 1))
        lines.append(f"s{i:03d},{label},{score!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cluster_fixture_points() -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(CLUSTER_SEED))
    a = rng.standard_normal((6, 2)) * 0.8
    b = rng.standard_normal((6, 2)) * 0.8 + np.array([4.0, 1.0])
    return np.vstack([a, b])


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    PRIMARY_FIXTURES.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        checkpoint = work / "toy_mlp.npz"
        build_checkpoint(checkpoint)
        manifest = build_wavs_and_manifest(work)

        nceb_out = FIXTURES / "exporter_embeddings.nceb"
        export_embeddings(
            ExportJob(
                checkpoint=str(checkpoint),
                manifest=str(manifest),
                layer="dense1",
                out=str(nceb_out),
                batch_size=4,
            )
        )
        relativize_nceb_ids(nceb_out, work)

    scores_out = FIXTURES / "exporter_scores.csv"
    build_scores_csv(scores_out)

    oracle_suite(
        table_path=nceb_out,
        scores_path=scores_out,
        cluster_points=cluster_fixture_points(),
        cluster_k=2,
        cluster_seed=CLUSTER_SEED,
        out_path=FIXTURES / "exporter_reference.json",
    )

    for name in (
        "exporter_embeddings.nceb",
        "exporter_scores.csv",
        "exporter_reference.json",
    ):
        shutil.copyfile(FIXTURES / name, PRIMARY_FIXTURES / name)
    print(f"fixtures written to {FIXTURES} and mirrored to {PRIMARY_FIXTURES}")


if __name__ == "__main__":
    main()
