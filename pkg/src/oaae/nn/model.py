"""The five OAAE networks and their binary checkpoint format.

Checkpoint layout::

    b"OAAE" | version byte | uint32 LE header length | JSON header | float32 LE arrays

The JSON header lists every network's layer specs and parameter shapes; the
raw arrays follow in that order.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import rng as rng_mod
from .layers import (ConfigurationError, Conv2d, ConvTranspose2d, Flatten, LeakyReLU, Linear,
                     Reshape, Sigmoid, conv_out_size, layer_from_spec)
from .network import Network

MAGIC = b"OAAE"
FORMAT_VERSION = 1
NETWORK_NAMES = ("encoder", "decoder", "latent_discriminator", "image_discriminator", "classifier")


class CheckpointError(ValueError):
    pass


@dataclass
class ModelBundle:
    encoder: Network
    decoder: Network
    latent_discriminator: Network
    image_discriminator: Network
    classifier: Network
    latent_dim: int
    image_shape: tuple
    num_classes: int

    def networks(self) -> dict[str, Network]:
        return {name: getattr(self, name) for name in NETWORK_NAMES}

    def snapshot(self) -> dict[str, list[np.ndarray]]:
        return {name: [p.copy() for p in net.params] for name, net in self.networks().items()}


def _conv_stack(in_shape, channels):
    layers, shapes = [], [tuple(in_shape)]
    c = in_shape[0]
    for out_c in channels:
        conv = Conv2d(c, out_c, kernel=3, stride=2, padding=1)
        layers += [conv, LeakyReLU(0.2)]
        shapes.append(conv.out_shape(shapes[-1]))
        c = out_c
    return layers, shapes


def build_model(image_shape=(1, 28, 28), latent_dim: int = 32, num_classes: int = 10, seed: int = 0,
                channels=(16, 32, 32), hidden: int = 128, dtype=np.float32) -> ModelBundle:
    """Encoder: 3 stride-2 convs + 2 fc.  Decoder: 2 fc + 3 transposed convs + sigmoid."""
    image_shape = tuple(int(s) for s in image_shape)
    enc_convs, shapes = _conv_stack(image_shape, channels)
    flat = int(np.prod(shapes[-1]))
    encoder = Network("encoder", image_shape, enc_convs + [
        Flatten(), Linear(flat, hidden), LeakyReLU(0.2), Linear(hidden, latent_dim)], dtype)

    dec_layers = [Linear(latent_dim, hidden), LeakyReLU(0.2), Linear(hidden, flat), LeakyReLU(0.2),
                  Reshape(shapes[-1])]
    for k in range(len(channels), 0, -1):
        src, dst = shapes[k], shapes[k - 1]
        natural = (src[1] - 1) * 2 - 2 + 3
        dec_layers.append(ConvTranspose2d(src[0], dst[0], 3, 2, 1, output_padding=dst[1] - natural))
        dec_layers.append(LeakyReLU(0.2) if k > 1 else Sigmoid())
    decoder = Network("decoder", (latent_dim,), dec_layers, dtype)

    latent_disc = Network("latent_discriminator", (latent_dim,), [
        Linear(latent_dim, hidden), LeakyReLU(0.2), Linear(hidden, hidden), LeakyReLU(0.2),
        Linear(hidden, 1)], dtype)
    disc_convs, dshapes = _conv_stack(image_shape, channels)
    image_disc = Network("image_discriminator", image_shape, disc_convs + [
        Flatten(), Linear(int(np.prod(dshapes[-1])), 1)], dtype)
    classifier = Network("classifier", (latent_dim,), [
        Linear(latent_dim, hidden), LeakyReLU(0.2), Linear(hidden, num_classes)], dtype)

    bundle = ModelBundle(encoder, decoder, latent_disc, image_disc, classifier,
                         latent_dim, image_shape, num_classes)
    for name, net in bundle.networks().items():
        net.init_params(rng_mod.stream(seed, f"init/{name}"))
    if decoder.output_shape != image_shape:
        raise ConfigurationError(f"decoder output {decoder.output_shape} != image shape {image_shape}")
    return bundle


def save_checkpoint(model: ModelBundle, path) -> None:
    header = {
        "latent_dim": model.latent_dim,
        "image_shape": list(model.image_shape),
        "num_classes": model.num_classes,
        "networks": [
            dict(net.spec(), param_shapes=[list(p.shape) for p in net.params])
            for net in model.networks().values()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC + bytes([FORMAT_VERSION]) + struct.pack("<I", len(blob)) + blob)
        for net in model.networks().values():
            for p in net.params:
                fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_checkpoint(path) -> ModelBundle:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic at offset 0 (expected {MAGIC!r})")
    if len(data) < 9 or data[4] != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version at offset 4")
    (hlen,) = struct.unpack_from("<I", data, 5)
    try:
        header = json.loads(data[9:9 + hlen])
    except ValueError as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from None
    offset = 9 + hlen
    nets = {}
    for spec in header["networks"]:
        net = Network(spec["name"], spec["input_shape"], [layer_from_spec(s) for s in spec["layers"]])
        params = []
        for shape in spec["param_shapes"]:
            count = int(np.prod(shape))
            end = offset + 4 * count
            if end > len(data):
                raise CheckpointError(f"{path}: truncated parameter data at offset {offset}")
            params.append(np.frombuffer(data, dtype="<f4", count=count, offset=offset)
                          .astype(np.float32).reshape(shape))
            offset = end
        for layer in net.layers:  # allocate placeholders so set_params can check shapes
            layer.init_params(np.random.default_rng(0), np.float32)
        net.set_params(params)
        nets[spec["name"]] = net
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes at offset {offset}")
    missing = set(NETWORK_NAMES) - set(nets)
    if missing:
        raise CheckpointError(f"{path}: missing networks {sorted(missing)}")
    return ModelBundle(**nets, latent_dim=header["latent_dim"],
                       image_shape=tuple(header["image_shape"]), num_classes=header["num_classes"])
