"""Alternating adversarial training of the OAAE networks.

Each iteration runs one discriminator update; every ``generator_period``-th
iteration (counted from 0 within an epoch) additionally updates the
encoder, decoder and classifier on the weighted sum of reconstruction,
adversarial, OLE and classification losses.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .data import Dataset, gaussian_noise
from .nn import AdamState, ModelBundle, adam_step, bce_logit, build_model, cross_entropy, save_checkpoint, squared_error
from .ole import LabeledLatentBatch, OleConfig, ole_loss_and_grad

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("l_latent", "l_image", "l_recon", "l_enc", "l_dec", "l_ole", "l_cls")
GENERATOR_NETS = ("encoder", "decoder", "classifier")
DISCRIMINATOR_NETS = ("latent_discriminator", "image_discriminator")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 4e-4
    noise_std: float = 0.02
    generator_period: int = 5
    lambda_recon: float = 1.0
    lambda_adv_enc: float = 0.1
    lambda_adv_dec: float = 0.1
    lambda_ole: float = 0.1
    lambda_cls: float = 0.1
    ole: OleConfig = field(default_factory=OleConfig)
    seed: int = 0
    latent_dim: int = 32
    channels: tuple = (32, 64, 64)
    hidden: int = 256
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    clamp_noise: bool = False

    def __post_init__(self):
        if isinstance(self.ole, dict):
            self.ole = OleConfig(**self.ole)
        self.channels = tuple(int(c) for c in self.channels)
        for name in ("epochs", "batch_size", "generator_period", "latent_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        for name in ("lambda_recon", "lambda_adv_enc", "lambda_adv_dec", "lambda_ole", "lambda_cls"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def adam(self, params) -> AdamState:
        return AdamState.for_params(params, learning_rate=self.learning_rate, beta1=self.beta1,
                                    beta2=self.beta2, epsilon=self.epsilon)


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    checkpoint: str | None = None

    def write_loss_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("epoch",) + LOSS_COLUMNS)
            for row in self.epochs:
                writer.writerow([row["epoch"]] + [repr(row[c]) for c in LOSS_COLUMNS])


class Trainer:
    """Holds the model, per-network Adam states and the named random streams."""

    def __init__(self, model: ModelBundle, cfg: TrainConfig):
        self.model = model
        self.cfg = cfg
        self.adam = {name: cfg.adam(net.params) for name, net in model.networks().items()}
        self.noise_rng = rng_mod.stream(cfg.seed, "noise")
        self.latent_rng = rng_mod.stream(cfg.seed, "sampling")

    def _update(self, name, grads):
        net = getattr(self.model, name)
        params, self.adam[name] = adam_step(net.params, grads, self.adam[name])
        net.set_params(params)

    def _noisy(self, x):
        return gaussian_noise(x, self.cfg.noise_std, self.noise_rng, clamp=self.cfg.clamp_noise)

    def _prior(self, n):
        dtype = self.model.encoder.dtype
        return self.latent_rng.standard_normal((n, self.model.latent_dim)).astype(dtype)

    def discriminator_step(self, x, labels=None) -> dict:
        m = self.model
        z_prior = self._prior(len(x))
        z_enc = m.encoder(self._noisy(x))

        grads = None
        loss_latent = 0.0
        for z, target in ((z_prior, 1.0), (z_enc, 0.0)):
            out, cache = m.latent_discriminator.forward(z)
            value, dout = bce_logit(out, target)
            g, _ = m.latent_discriminator.backward(cache, dout)
            grads = g if grads is None else [a + b for a, b in zip(grads, g)]
            loss_latent += value
        latent_grads = grads

        grads = None
        loss_image = 0.0
        for img, target in ((x, 1.0), (m.decoder(z_prior), 0.0)):
            out, cache = m.image_discriminator.forward(img)
            value, dout = bce_logit(out, target)
            g, _ = m.image_discriminator.backward(cache, dout)
            grads = g if grads is None else [a + b for a, b in zip(grads, g)]
            loss_image += value

        self._update("latent_discriminator", latent_grads)
        self._update("image_discriminator", grads)
        return {"l_latent": loss_latent, "l_image": loss_image}

    def generator_step(self, x, labels) -> dict:
        m, cfg = self.model, self.cfg
        z_prior = self._prior(len(x))
        z, enc_cache = m.encoder.forward(self._noisy(x))
        if not np.all(np.isfinite(z)):
            raise TrainingError("encoder produced non-finite latents")

        x_rec, rec_cache = m.decoder.forward(z)
        l_recon, d_rec = squared_error(x, x_rec)
        dec_grads, dz = m.decoder.backward(rec_cache, cfg.lambda_recon * d_rec)

        out, cache = m.latent_discriminator.forward(z)
        l_enc, dout = bce_logit(out, 1.0)
        _, dz_adv = m.latent_discriminator.backward(cache, cfg.lambda_adv_enc * dout)
        dz = dz + dz_adv

        x_gen, gen_cache = m.decoder.forward(z_prior)
        out, cache = m.image_discriminator.forward(x_gen)
        l_dec, dout = bce_logit(out, 1.0)
        _, dx_gen = m.image_discriminator.backward(cache, cfg.lambda_adv_dec * dout)
        g, _ = m.decoder.backward(gen_cache, dx_gen)
        dec_grads = [a + b for a, b in zip(dec_grads, g)]

        l_ole, ole_g = ole_loss_and_grad(LabeledLatentBatch(z.T, labels), cfg.ole)
        dz = dz + (cfg.lambda_ole * ole_g.T).astype(z.dtype)

        logits, cache = m.classifier.forward(z)
        l_cls, dlogits = cross_entropy(logits, labels)
        cls_grads, dz_cls = m.classifier.backward(cache, cfg.lambda_cls * dlogits)
        dz = dz + dz_cls

        enc_grads, _ = m.encoder.backward(enc_cache, dz)
        self._update("encoder", enc_grads)
        self._update("decoder", dec_grads)
        self._update("classifier", cls_grads)

        losses = {"l_recon": l_recon, "l_enc": l_enc, "l_dec": l_dec, "l_ole": l_ole, "l_cls": l_cls}
        losses["total"] = (cfg.lambda_recon * l_recon + cfg.lambda_adv_enc * l_enc
                           + cfg.lambda_adv_dec * l_dec + cfg.lambda_ole * l_ole + cfg.lambda_cls * l_cls)
        return losses


def _check_finite(losses, epoch, iteration):
    for term, value in losses.items():
        if not np.isfinite(value):
            raise TrainingError(f"non-finite {term}={value} at epoch {epoch}, iteration {iteration}")


def train(dataset: Dataset, cfg: TrainConfig, model: ModelBundle | None = None,
          checkpoint_path=None, loss_log_path=None, checkpoint_every_epoch: bool = False):
    """Train on ``dataset`` (normal classes only).  Returns ``(model, TrainReport)``."""
    if len(dataset) == 0:
        raise TrainingError("training dataset is empty")
    classes, labels = np.unique(dataset.labels, return_inverse=True)
    if model is None:
        model = build_model(dataset.image_shape, cfg.latent_dim, len(classes), seed=cfg.seed,
                            channels=cfg.channels, hidden=cfg.hidden)
    trainer = Trainer(model, cfg)
    shuffle_rng = rng_mod.stream(cfg.seed, "shuffle")
    report = TrainReport()
    n = len(dataset)

    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        perm = shuffle_rng.permutation(n)
        sums = dict.fromkeys(LOSS_COLUMNS, 0.0)
        counts = dict.fromkeys(LOSS_COLUMNS, 0)
        for iteration, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[lo:lo + cfg.batch_size]
            x, y = dataset.images[idx], labels[idx]
            step_losses = trainer.discriminator_step(x, y)
            _check_finite(step_losses, epoch, iteration)
            if iteration % cfg.generator_period == 0:
                try:
                    step_losses.update(trainer.generator_step(x, y))
                except TrainingError as exc:
                    raise TrainingError(f"{exc} at epoch {epoch}, iteration {iteration}") from None
                _check_finite(step_losses, epoch, iteration)
            for key in LOSS_COLUMNS:
                if key in step_losses:
                    sums[key] += step_losses[key]
                    counts[key] += 1
        row = {"epoch": epoch, **{k: sums[k] / max(counts[k], 1) for k in LOSS_COLUMNS},
               "seconds": time.perf_counter() - start}
        report.epochs.append(row)
        log.info("epoch %d: %s", epoch, {k: round(row[k], 4) for k in LOSS_COLUMNS})
        if checkpoint_path is not None and checkpoint_every_epoch:
            save_checkpoint(model, checkpoint_path)

    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
        report.checkpoint = str(checkpoint_path)
    if loss_log_path is not None:
        report.write_loss_csv(loss_log_path)
    return model, report
