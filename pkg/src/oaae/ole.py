"""Orthogonal low-rank embedding (OLE) loss on a labeled latent minibatch.

The latent batch is stored column-wise: ``latents`` is ``d x m`` with one
column per example.  For the classes present in the batch,

    loss = sum_c max(margin, ||Y_c||_*) - ||Y||_*

which is zero when the class subspaces are mutually orthogonal and grows as
they overlap.  The descent direction scatters each active class's nuclear
norm subgradient into that class's columns and subtracts the full-batch
subgradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg


@dataclass(frozen=True)
class OleConfig:
    delta_margin: float = 1.0
    sv_threshold: float = 1e-3

    def __post_init__(self):
        for name in ("delta_margin", "sv_threshold"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class LabeledLatentBatch:
    latents: np.ndarray  # (d, m)
    labels: np.ndarray  # (m,)
    num_classes: int | None = None

    def __post_init__(self):
        latents = linalg.as_matrix(self.latents)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != latents.shape[1]:
            raise ValueError(
                f"{labels.shape[0]} labels for a batch of {latents.shape[1]} columns"
            )
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be nonnegative")
        if self.num_classes is not None and labels.size and labels.max() >= self.num_classes:
            raise ValueError(f"label {labels.max()} out of range for {self.num_classes} classes")
        object.__setattr__(self, "latents", latents)
        object.__setattr__(self, "labels", labels)


def partition_by_class(batch: LabeledLatentBatch) -> list[tuple[int, np.ndarray]]:
    """Split the batch into per-class column blocks, in ascending label order."""
    return [
        (int(c), batch.latents[:, batch.labels == c])
        for c in np.unique(batch.labels)
    ]


def ole_loss(batch: LabeledLatentBatch, cfg: OleConfig = OleConfig()) -> float:
    class_terms = sum(
        max(cfg.delta_margin, linalg.nuclear_norm(block))
        for _, block in partition_by_class(batch)
    )
    return float(class_terms - linalg.nuclear_norm(batch.latents))


def ole_grad(batch: LabeledLatentBatch, cfg: OleConfig = OleConfig()) -> np.ndarray:
    """Descent direction of :func:`ole_loss` with respect to ``batch.latents``."""
    grad = np.zeros_like(batch.latents)
    for c, block in partition_by_class(batch):
        if linalg.nuclear_norm(block) <= cfg.delta_margin:
            continue  # hinge inactive
        grad[:, batch.labels == c] = linalg.nuclear_norm_subgradient(block, cfg.sv_threshold)
    grad -= linalg.nuclear_norm_subgradient(batch.latents, cfg.sv_threshold)
    return grad


def ole_loss_and_grad(batch: LabeledLatentBatch, cfg: OleConfig = OleConfig()) -> tuple[float, np.ndarray]:
    """Loss and descent direction sharing one SVD per block."""
    grad = np.zeros_like(batch.latents)
    loss = 0.0
    for c, block in partition_by_class(batch):
        res = linalg.svd(block)
        norm = float(res.s.sum())
        loss += max(cfg.delta_margin, norm)
        if norm > cfg.delta_margin:
            keep = res.s > cfg.sv_threshold
            grad[:, batch.labels == c] = res.u[:, keep] @ res.v[:, keep].T
    full = linalg.svd(batch.latents)
    keep = full.s > cfg.sv_threshold
    grad -= full.u[:, keep] @ full.v[:, keep].T
    return loss - float(full.s.sum()), grad
