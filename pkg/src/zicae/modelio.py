"""Model file format: versioned text header plus a flat float64 payload.

Layout::

    ZICAE-MODEL v1\n
    key=value lines (architecture hash, config digest, metadata)\n
    array=<name>:<d0>x<d1> lines, one per parameter/state array\n
    DATA\n
    <row-major little-endian float64 values, concatenated in array order>

Writing the same trained model twice produces byte-identical files.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .autoencoder import AblationFlags, Receiver, TrainConfig, Transmitter, ZicAutoencoder

MAGIC = "ZICAE-MODEL v1"

_FLAG_NAMES = ("use_shortcuts", "alpha_to_subnet1", "alpha_to_subnet2",
               "alpha_to_rx", "use_subnet2")


def _dense_layers(stack) -> list:
    """Unwrap residual shortcuts so every entry owns W/b."""
    out = []
    for layer in stack:
        out.append(layer.inner if hasattr(layer, "inner") else layer)
    return out


def _tx_arrays(name: str, tx: Transmitter) -> list[tuple[str, np.ndarray]]:
    rows = []
    for i, layer in enumerate(_dense_layers(tx.net1)):
        rows.append((f"{name}.net1.{i}.W", layer.W))
        rows.append((f"{name}.net1.{i}.b", layer.b))
    rows.append((f"{name}.bpn.running_ms", tx.bpn.running_ms))
    for i, layer in enumerate(_dense_layers(tx.net2)):
        rows.append((f"{name}.net2.{i}.W", layer.W))
        rows.append((f"{name}.net2.{i}.b", layer.b))
    return rows


def _rx_arrays(name: str, rx: Receiver) -> list[tuple[str, np.ndarray]]:
    rows = [(f"{name}.bpn.running_ms", rx.bpn.running_ms)]
    for i, layer in enumerate(_dense_layers(rx.net)):
        rows.append((f"{name}.net.{i}.W", layer.W))
        rows.append((f"{name}.net.{i}.b", layer.b))
    return rows


def model_arrays(model: ZicAutoencoder) -> list[tuple[str, np.ndarray]]:
    """Every parameter and normalization-state array, in serialization order."""
    return (_tx_arrays("tx1", model.tx1) + _tx_arrays("tx2", model.tx2)
            + _rx_arrays("rx1", model.rx1) + _rx_arrays("rx2", model.rx2))


def config_text(cfg: TrainConfig) -> str:
    """Canonical flat key=value rendering of a training config."""
    lines = [
        f"n_bits={cfg.n_bits}",
        f"alpha_min={cfg.alpha_min!r}",
        f"alpha_max={cfg.alpha_max!r}",
        f"total_power={cfg.total_power!r}",
        f"train_snr_db={cfg.train_snr_db!r}",
        f"n_channels={cfg.n_channels}",
        f"epochs_per_channel={cfg.epochs_per_channel}",
        f"batch={cfg.batch}",
        f"lr={cfg.lr!r}",
        f"decay={cfg.decay!r}",
        f"decay_every={cfg.decay_every}",
        f"seed={cfg.seed}",
        f"csi_mode={cfg.csi_mode}",
        f"sigma_e2={cfg.sigma_e2!r}",
        f"threshold_t={cfg.threshold_t!r}",
        f"n_q={cfg.n_q}",
        f"mu_h_re={cfg.mu_h.real!r}",
        f"mu_h_im={cfg.mu_h.imag!r}",
        f"sigma_h2={cfg.sigma_h2!r}",
        f"hidden_width={cfg.hidden_width}",
        f"n_res_blocks={cfg.n_res_blocks}",
        f"subnet2_width={cfg.subnet2_width}",
    ]
    lines += [f"{f}={int(getattr(cfg.flags, f))}" for f in _FLAG_NAMES]
    return "\n".join(lines) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_model(path, model: ZicAutoencoder, cfg: TrainConfig | None = None) -> None:
    arrays = model_arrays(model)
    header = [MAGIC,
              f"arch_sha256={_sha256(model.arch_descriptor().encode())}",
              f"config_sha256={_sha256(config_text(cfg).encode()) if cfg else '-'}",
              f"n_bits={model.n_bits}",
              f"csi_mode={model.csi_mode}",
              f"alpha_min={model.alpha_min!r}",
              f"alpha_max={model.alpha_max!r}",
              f"total_power={model.total_power!r}",
              f"train_snr_db={model.train_snr_db!r}",
              f"hidden_width={model.hidden_width}",
              f"n_res_blocks={model.n_res_blocks}",
              f"subnet2_width={model.subnet2_width}"]
    header += [f"{f}={int(getattr(model.flags, f))}" for f in _FLAG_NAMES]
    header.append(f"arrays={len(arrays)}")
    for name, arr in arrays:
        shape = "x".join(str(d) for d in np.atleast_1d(arr).shape)
        header.append(f"array={name}:{shape}")
    header.append("DATA")
    blob = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in arrays)
    with open(path, "wb") as fh:
        fh.write("\n".join(header).encode() + b"\n")
        fh.write(blob)


def load_model(path) -> ZicAutoencoder:
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.find(b"DATA\n")
    if not raw.startswith(MAGIC.encode()) or sep < 0:
        raise ValueError(f"{path}: not a model file")
    head = raw[:sep].decode().splitlines()[1:]
    blob = raw[sep + len(b"DATA\n"):]

    meta: dict[str, str] = {}
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for line in head:
        key, _, value = line.partition("=")
        if key == "array":
            name, _, dims = value.partition(":")
            shapes.append((name, tuple(int(d) for d in dims.split("x"))))
        else:
            meta[key] = value

    flags = AblationFlags(**{f: bool(int(meta[f])) for f in _FLAG_NAMES})
    cfg = TrainConfig(
        n_bits=int(meta["n_bits"]), csi_mode=meta["csi_mode"],
        alpha_min=float(meta["alpha_min"]), alpha_max=float(meta["alpha_max"]),
        total_power=float(meta["total_power"]),
        train_snr_db=float(meta["train_snr_db"]),
        hidden_width=int(meta["hidden_width"]),
        n_res_blocks=int(meta["n_res_blocks"]),
        subnet2_width=int(meta["subnet2_width"]), flags=flags)
    model = ZicAutoencoder(cfg, np.random.default_rng(0))

    arrays = dict(model_arrays(model))
    offset = 0
    for name, shape in shapes:
        if name not in arrays:
            raise ValueError(f"{path}: unknown array {name!r}")
        target = arrays[name]
        count = int(np.prod(shape))
        values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        target[...] = values.reshape(target.shape)
    if offset != len(blob):
        raise ValueError(f"{path}: payload size mismatch")
    return model


def file_sha256(path) -> str:
    with open(path, "rb") as fh:
        return _sha256(fh.read())
