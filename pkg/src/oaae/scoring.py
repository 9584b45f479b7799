"""Test-time novelty scores.

The angle score compares ``z0 = Enc(x)`` with ``z1 = Enc(Dec(z0))``; the
reconstruction baseline is the mean squared pixel error of ``Dec(Enc(x))``.
No noise is added at test time.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import ModelBundle

SCORE_KINDS = ("angle", "mse")
EVAL_BATCH = 256
MIN_LATENT_NORM = 1e-12


class DegenerateLatentError(ValueError):
    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(f"latent norm below {MIN_LATENT_NORM} for examples {self.indices}")


@dataclass(frozen=True)
class ScoredExample:
    example_id: int
    novelty_score: float
    is_novel: bool | None = None
    score_kind: str = "angle"


def latent_angle(z0, z1) -> np.ndarray:
    """Row-wise angle in radians between two latent batches."""
    z0 = np.atleast_2d(np.asarray(z0, dtype=np.float64))
    z1 = np.atleast_2d(np.asarray(z1, dtype=np.float64))
    n0, n1 = np.linalg.norm(z0, axis=1), np.linalg.norm(z1, axis=1)
    bad = np.flatnonzero((n0 < MIN_LATENT_NORM) | (n1 < MIN_LATENT_NORM))
    if bad.size:
        raise DegenerateLatentError(bad)
    cos = np.einsum("ij,ij->i", z0, z1) / (n0 * n1)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def _batched(fn, images, batch_size=EVAL_BATCH):
    images = np.asarray(images)
    if len(images) == 0:
        return np.zeros(0)
    return np.concatenate([fn(images[i:i + batch_size]) for i in range(0, len(images), batch_size)])


def angle_scores(model: ModelBundle, images) -> np.ndarray:
    def fn(x):
        z0 = model.encoder(x)
        z1 = model.encoder(model.decoder(z0))
        return latent_angle(z0, z1)
    return _batched(fn, images)


def mse_scores(model: ModelBundle, images) -> np.ndarray:
    def fn(x):
        x_hat = model.decoder(model.encoder(x))
        diff = x_hat.astype(np.float64) - x.astype(np.float64)
        return np.mean(diff.reshape(len(x), -1) ** 2, axis=1)
    return _batched(fn, images)


def encode(model: ModelBundle, images) -> np.ndarray:
    images = np.asarray(images)
    return np.concatenate([model.encoder(images[i:i + EVAL_BATCH])
                           for i in range(0, len(images), EVAL_BATCH)])


def novelty_score(model: ModelBundle, x) -> float:
    return float(angle_scores(model, np.asarray(x)[None])[0])


def recon_error_score(model: ModelBundle, x) -> float:
    return float(mse_scores(model, np.asarray(x)[None])[0])


def score_batch(model: ModelBundle, images, kind: str = "angle", is_novel=None) -> list[ScoredExample]:
    if kind not in SCORE_KINDS:
        raise ValueError(f"unknown score kind {kind!r}")
    images = np.asarray(images)
    if kind == "angle":
        # score chunk by chunk so degenerate examples are reported with global indices
        scores, bad = [], []
        for lo in range(0, len(images), EVAL_BATCH):
            try:
                scores.append(angle_scores(model, images[lo:lo + EVAL_BATCH]))
            except DegenerateLatentError as exc:
                bad += [lo + i for i in exc.indices]
        if bad:
            raise DegenerateLatentError(bad)
        scores = np.concatenate(scores) if scores else np.zeros(0)
    else:
        scores = mse_scores(model, images)
    flags = [None] * len(scores) if is_novel is None else [bool(f) for f in is_novel]
    return [ScoredExample(i, float(s), f, kind) for i, (s, f) in enumerate(zip(scores, flags))]


def write_scores_csv(scored: list[ScoredExample], out) -> None:
    """Write to a path or an open text stream."""
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="") as fh:
            return write_scores_csv(scored, fh)
    writer = csv.writer(out)
    writer.writerow(("example_id", "score", "is_novel", "score_kind"))
    for s in scored:
        flag = "" if s.is_novel is None else int(s.is_novel)
        writer.writerow((s.example_id, repr(s.novelty_score), flag, s.score_kind))
