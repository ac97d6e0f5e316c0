"""Embedding export: checkpoint + dataset manifest -> .nceb table.

The dataset manifest is a CSV with header ``path,label,algorithm_id``; one
output record per row, in row order (batches are buffered back into manifest
order before writing). The whole table is validated before a single byte is
written, so a defective checkpoint can never leave a partial file behind.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nc_export.adapters import load_checkpoint, select_layer
from nc_export.errors import AudioDecodeError, MalformedManifest, NonFiniteValue
from nc_export.format import Record, write_nceb

LABEL_TOKENS = {"real": 0, "fake": 1}


@dataclass(frozen=True)
class ExportJob:
    checkpoint: str
    manifest: str
    layer: str
    out: str
    batch_size: int = 32
    framework: str = "npz-mlp"


@dataclass(frozen=True)
class ManifestRow:
    path: str
    label: int
    algorithm_id: int


def read_dataset_manifest(path: str | Path) -> list[ManifestRow]:
    rows = list(csv.reader(Path(path).read_text(encoding="utf-8").splitlines()))
    if not rows or rows[0] != ["path", "label", "algorithm_id"]:
        raise MalformedManifest(f"{path}: expected header path,label,algorithm_id")
    out = []
    for lineno, cells in enumerate(rows[1:], start=2):
        if len(cells) != 3:
            raise MalformedManifest(f"{path}:{lineno}: expected 3 columns")
        wav_path, label_token, algo_text = cells
        if label_token not in LABEL_TOKENS:
            raise MalformedManifest(f"{path}:{lineno}: unknown label {label_token!r}")
        try:
            algorithm_id = int(algo_text)
        except ValueError as exc:
            raise MalformedManifest(f"{path}:{lineno}: bad algorithm_id") from exc
        out.append(ManifestRow(wav_path, LABEL_TOKENS[label_token], algorithm_id))
    return out


def decode_audio(path: str | Path, length: int) -> np.ndarray:
    """16-bit mono PCM to float64 in [-1, 1), padded/trimmed to ``length``."""
    try:
        with wave.open(str(path), "rb") as handle:
            if (
                handle.getcomptype() != "NONE"
                or handle.getsampwidth() != 2
                or handle.getnchannels() != 1
            ):
                raise AudioDecodeError(f"{path}: need 16-bit mono PCM")
            pcm = np.frombuffer(
                handle.readframes(handle.getnframes()), dtype="<i2"
            ).astype(np.float64)
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioDecodeError(f"{path}: {exc}") from exc
    samples = pcm / 32768.0
    if samples.shape[0] >= length:
        return samples[:length]
    return np.concatenate([samples, np.zeros(length - samples.shape[0])])


def export_embeddings(job: ExportJob) -> None:
    forward, input_len = load_checkpoint(job.checkpoint, job.framework)
    manifest = read_dataset_manifest(job.manifest)

    records: list[Record] = []
    dimension: int | None = None
    for start in range(0, len(manifest), job.batch_size):
        batch = manifest[start : start + job.batch_size]
        for row in batch:
            activations = forward(decode_audio(row.path, input_len))
            embedding = np.asarray(select_layer(activations, job.layer), dtype=np.float32)
            if dimension is None:
                dimension = embedding.shape[0]
            if not np.all(np.isfinite(embedding)):
                raise NonFiniteValue(
                    f"{row.path}: layer {job.layer} produced non-finite values; aborting"
                )
            records.append(
                Record(row.path, row.label, row.algorithm_id, embedding)
            )
    if dimension is None:
        raise MalformedManifest(f"{job.manifest}: no rows to export")
    write_nceb(job.out, dimension, records)
