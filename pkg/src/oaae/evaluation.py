"""AUROC and the one-class-held-out evaluation protocol."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, load_dataset
from .nn import ModelBundle
from .scoring import angle_scores, mse_scores
from .training import TrainConfig, train

log = logging.getLogger(__name__)


class UndefinedAurocError(ValueError):
    pass


def _split_scores(scores, is_novel):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    is_novel = np.asarray(is_novel, dtype=bool).reshape(-1)
    if scores.shape != is_novel.shape:
        raise ValueError("scores and flags differ in length")
    n_pos = int(is_novel.sum())
    n_neg = len(is_novel) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAurocError(f"AUROC needs both classes (got {n_pos} novel, {n_neg} normal)")
    return scores, is_novel, n_pos, n_neg


def auroc(scores, is_novel) -> float:
    """Mann-Whitney AUROC, ties counted as one half.  Higher score = more novel."""
    scores, is_novel, n_pos, n_neg = _split_scores(scores, is_novel)
    ranks = rankdata(scores)  # average ranks, so ties contribute 1/2
    u = ranks[is_novel].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auroc_pairwise(scores, is_novel) -> float:
    """O(n^2) reference: fraction of (novel, normal) pairs ordered correctly."""
    scores, is_novel, n_pos, n_neg = _split_scores(scores, is_novel)
    pos, neg = scores[is_novel][:, None], scores[~is_novel][None, :]
    wins = np.count_nonzero(pos > neg) + 0.5 * np.count_nonzero(pos == neg)
    return float(wins / (n_pos * n_neg))


def latent_cosine_stats(latents, labels) -> dict:
    """Mean intra-class cosine similarity and mean inter-class |cosine|."""
    z = np.asarray(latents, dtype=np.float64)
    z = z / np.linalg.norm(z, axis=1, keepdims=True)
    labels = np.asarray(labels)
    cos = z @ z.T
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(len(labels), dtype=bool)
    return {"intra_cos": float(cos[same & off_diag].mean()),
            "inter_abs_cos": float(np.abs(cos[~same]).mean())}


@dataclass
class ProtocolSpec:
    dataset: str
    novelty_class: int
    num_classes: int = 10
    seed: int = 0
    data_root: str | None = None
    synthetic: dict = field(default_factory=dict)
    test_per_class: int | None = None
    score_kind: str = "angle"

    def __post_init__(self):
        if self.dataset == "synthetic":
            self.num_classes = self.synthetic.setdefault("num_classes", self.num_classes)
        if not 0 <= self.novelty_class < self.num_classes:
            raise ValueError(f"novelty class {self.novelty_class} outside 0..{self.num_classes - 1}")
        if self.num_classes < 2:
            raise ValueError("need at least one normal class")

    @property
    def normal_classes(self) -> list[int]:
        return [c for c in range(self.num_classes) if c != self.novelty_class]

    def load(self, split: str) -> Dataset:
        if self.dataset == "synthetic":
            params = dict(self.synthetic)
            params.setdefault("seed", self.seed)
            if split == "test" and self.test_per_class is not None:
                params["per_class"] = self.test_per_class
            return load_dataset("synthetic", split, **params)
        return load_dataset(self.dataset, split, self.data_root)


@dataclass
class CellResult:
    novelty_class: int
    auroc: float | None
    error: str | None = None
    checkpoint: str | None = None
    model: ModelBundle | None = None
    test: Dataset | None = None
    scores: np.ndarray | None = None
    seeds: list = field(default_factory=list)
    runs: list = field(default_factory=list)  # per-seed AUROCs; ``auroc`` is their mean


def run_cell(spec: ProtocolSpec, cfg: TrainConfig, checkpoint_dir=None) -> CellResult:
    train_set = spec.load("train").without_class(spec.novelty_class)
    test_set = spec.load("test")
    ckpt = None
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
        ckpt = str(Path(checkpoint_dir) / f"{spec.dataset}_novel{spec.novelty_class}_seed{cfg.seed}.oaae")
    model, _ = train(train_set, cfg, checkpoint_path=ckpt)
    score_fn = angle_scores if spec.score_kind == "angle" else mse_scores
    scores = score_fn(model, test_set.images)
    value = auroc(scores, test_set.labels == spec.novelty_class)
    return CellResult(spec.novelty_class, value, None, ckpt, model, test_set, scores, [cfg.seed], [value])


@dataclass
class EvalReport:
    method: str
    dataset: str
    cells: list = field(default_factory=list)  # CellResult without model/test attached
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def mean(self) -> float | None:
        values = [c.auroc for c in self.cells if c.auroc is not None]
        return float(np.mean(values)) if values and len(values) == len(self.cells) else None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("method", "dataset", "novelty_class", "auroc", "seeds", "runs", "error", "checkpoint"))
            for c in self.cells:
                writer.writerow((self.method, self.dataset, c.novelty_class,
                                 "" if c.auroc is None else repr(c.auroc),
                                 " ".join(map(str, c.seeds)), " ".join(map(repr, c.runs)),
                                 c.error or "", c.checkpoint or ""))
            mean = self.mean
            writer.writerow((self.method, self.dataset, "mean", "" if mean is None else repr(mean), "", "", "", ""))

    def write_json(self, path) -> None:
        doc = {"method": self.method, "dataset": self.dataset, "mean_auroc": self.mean,
               "cells": [{"novelty_class": c.novelty_class, "auroc": c.auroc, "seeds": c.seeds,
                           "runs": c.runs, "error": c.error,
                          "checkpoint": c.checkpoint} for c in self.cells],
               "config": self.config, "provenance": self.provenance}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)

    def table(self) -> str:
        return format_table([(self.method, {c.novelty_class: c.auroc for c in self.cells}, self.mean)],
                            [c.novelty_class for c in self.cells])


def format_table(rows, columns) -> str:
    """Aligned text table: one row per method, one column per novelty class plus Mean."""
    def fmt(v):
        return "FAIL" if v is None else f"{v:.3f}"
    header = ["method"] + [str(c) for c in columns] + ["Mean"]
    body = [[name] + [fmt(cells.get(c)) for c in columns] + [fmt(mean)] for name, cells, mean in rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in [header] + body]
    return "\n".join(lines)


def read_report_csv(path) -> tuple[list, list]:
    """Parse a report CSV into ``format_table`` rows and columns."""
    rows, columns = {}, []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            name = f"{rec['method']} ({rec['dataset']})"
            cells, mean = rows.setdefault(name, ({}, [None]))
            value = float(rec["auroc"]) if rec["auroc"] else None
            if rec["novelty_class"] == "mean":
                mean[0] = value
            else:
                c = int(rec["novelty_class"])
                cells[c] = value
                if c not in columns:
                    columns.append(c)
    return [(n, cells, mean[0]) for n, (cells, mean) in rows.items()], sorted(columns)


def run_protocol(spec: ProtocolSpec, cfg: TrainConfig, classes=None, checkpoint_dir=None,
                 method: str = "OAAE", repeats: int = 1) -> EvalReport:
    """Train/score one cell per novelty class; failures are recorded, not raised.

    With ``repeats > 1`` each cell is trained with seeds ``cfg.seed .. cfg.seed + repeats - 1``
    and reports the mean AUROC.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    classes = [spec.novelty_class] if classes is None else list(classes)
    report = EvalReport(method, spec.dataset, config=cfg.to_dict())
    for c in classes:
        cell_spec = ProtocolSpec(spec.dataset, c, spec.num_classes, spec.seed, spec.data_root,
                                 dict(spec.synthetic), spec.test_per_class, spec.score_kind)
        try:
            seeds = [cfg.seed + r for r in range(repeats)]
            runs = [run_cell(cell_spec, replace(cfg, seed=s), checkpoint_dir) for s in seeds]
            report.provenance = runs[0].test.provenance
            aurocs = [r.auroc for r in runs]
            result = CellResult(c, float(np.mean(aurocs)), None, runs[-1].checkpoint, seeds=seeds, runs=aurocs)
        except Exception as exc:  # one failed cell must not abort the sweep
            log.warning("novelty class %s failed: %s", c, exc)
            result = CellResult(c, None, f"{type(exc).__name__}: {exc}")
        report.cells.append(result)
    return report
