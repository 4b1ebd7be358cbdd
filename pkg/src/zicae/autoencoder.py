"""Learned transmitter/receiver pairs for the Z-interference channel.

Each transmitter is two parallel branches: branch 1 shapes unit-power I/Q
symbols from the input bits (dense stack with shortcuts, then batch power
normalization) and branch 2 allocates the I/Q power split from the
interference intensity (tiny dense stack, then power normalization to the
total budget).  Multiplying the branches yields symbols whose batch-average
power equals the budget by construction.

Receivers batch-power-normalize the channel output, restore the desired
signal scale, append the CSI inputs available at that node, and decode
per-bit probabilities through a sigmoid output layer.

Training follows an iterate-over-channels schedule: per channel draw an
interference intensity (and, with imperfect CSI, a rejection-sampled
estimated channel plus a residual feedback angle), then run a few epochs of
random bit batches with a shared adaptive-moment optimizer.  Both receivers'
binary cross entropies are summed; the interfered receiver's loss reaches
both transmitters through the cross link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .channel import (
    ChannelDistribution,
    EquivalentChannel,
    EstimationConfig,
    FeedbackMessage,
    alpha_quantizer,
    draw_accepted_estimate,
    draw_channel,
    normalize_imperfect,
    quantize,
)
from .modem import Constellation, index_to_bits

PERFECT = "perfect"
IMPERFECT = "imperfect"

# conventional sub-interval split of the interference range: one trained
# model per interval, routed by the evaluation harness
STANDARD_INTERVALS = tuple((lo / 2.0, lo / 2.0 + 0.5) for lo in range(6))


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class AblationFlags:
    """Architecture toggles; all-true is the proposed configuration."""

    use_shortcuts: bool = True
    alpha_to_subnet1: bool = True
    alpha_to_subnet2: bool = True
    alpha_to_rx: bool = True
    use_subnet2: bool = True


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run (defaults follow the full-scale recipe)."""

    n_bits: int = 2
    alpha_min: float = 0.0
    alpha_max: float = 0.5
    total_power: float = 1.0
    train_snr_db: float = 10.0
    n_channels: int = 30000
    epochs_per_channel: int = 10
    batch: int = 10000
    lr: float = 1e-2
    decay: float = 0.95
    decay_every: int = 200
    seed: int = 0
    csi_mode: str = PERFECT
    sigma_e2: float = 0.0
    threshold_t: float = 1.0
    n_q: int = 3
    mu_h: complex = 1.0 + 0j
    sigma_h2: float = 0.1
    hidden_width: int = 64
    n_res_blocks: int = 2
    subnet2_width: int = 16
    flags: AblationFlags = field(default_factory=AblationFlags)

    def __post_init__(self):
        if not self.alpha_min < self.alpha_max:
            raise ValueError("need alpha_min < alpha_max")
        if self.csi_mode not in (PERFECT, IMPERFECT):
            raise ValueError(f"unknown csi_mode {self.csi_mode!r}")
        for name in ("n_bits", "epochs_per_channel", "batch", "decay_every",
                     "hidden_width", "subnet2_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_channels < 0 or self.n_res_blocks < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def noise_var(self) -> float:
        return self.total_power / 10.0 ** (self.train_snr_db / 10.0)


@dataclass(frozen=True)
class CsiInputs:
    """Interference knowledge available at each node for one channel.

    sa_* are sqrt-intensity values: the transmitters and Rx2 see the fed-back
    (possibly quantized) value, Rx1 its own non-quantized estimate plus the
    residual feedback angle.
    """

    sa_tx: float
    sa_rx1: float
    sa_rx2: float
    theta_delta: float | None = None


def receiver_scale(p_desired: float, noise_var: float) -> float:
    """Desired-signal scaling sqrt(1 + P_D/noise_var) applied after batch norm."""
    return math.sqrt(1.0 + p_desired / noise_var)


def _complex_matrix(h: complex) -> np.ndarray:
    """Real 2x2 form of multiplication by a complex gain."""
    return np.array([[h.real, -h.imag], [h.imag, h.real]])


class Transmitter:
    """Bit vector -> I/Q symbol with an average power constraint."""

    def __init__(self, n_bits: int, flags: AblationFlags, total_power: float,
                 hidden_width: int, n_res_blocks: int, subnet2_width: int,
                 rng: np.random.Generator):
        self.n_bits = n_bits
        self.flags = flags
        self.total_power = total_power
        n_in = n_bits + (1 if flags.alpha_to_subnet1 else 0)
        self.net1 = [nn.Dense(n_in, hidden_width, nn.TANH, rng)]
        for _ in range(n_res_blocks):
            block = nn.Dense(hidden_width, hidden_width, nn.TANH, rng)
            self.net1.append(nn.Residual(block) if flags.use_shortcuts else block)
        self.net1.append(nn.Dense(hidden_width, 2, nn.LINEAR, rng))
        self.bpn = nn.BatchPowerNorm(2)
        if flags.use_subnet2:
            self.net2 = [nn.Dense(1, subnet2_width, nn.TANH, rng),
                         nn.Dense(subnet2_width, 2, nn.LINEAR, rng)]
            self.pnorm = nn.PowerNorm(total_power)
        else:
            self.net2 = []
            self.pnorm = None
        self._xb = None
        self._gamma = None

    def forward(self, bits: np.ndarray, sqrt_alpha: float, training: bool) -> np.ndarray:
        x = np.asarray(bits, dtype=float)
        if self.flags.alpha_to_subnet1:
            x = np.concatenate([x, np.full((x.shape[0], 1), sqrt_alpha)], axis=1)
        for layer in self.net1:
            x = layer.forward(x)
        xb = self.bpn.forward(x, training)
        if self.flags.use_subnet2:
            a2 = np.array([[sqrt_alpha if self.flags.alpha_to_subnet2 else 1.0]])
            g = a2
            for layer in self.net2:
                g = layer.forward(g)
            gamma = self.pnorm.forward(g)
        else:
            gamma = np.full((1, 2), math.sqrt(self.total_power / 2.0))
        self._xb = xb
        self._gamma = gamma
        return xb * gamma

    def backward(self, grad_x: np.ndarray) -> None:
        if self.flags.use_subnet2:
            g_gamma = np.sum(grad_x * self._xb, axis=0, keepdims=True)
            g = self.pnorm.backward(g_gamma)
            for layer in reversed(self.net2):
                g = layer.backward(g)
        g = self.bpn.backward(grad_x * self._gamma)
        for layer in reversed(self.net1):
            g = layer.backward(g)

    def layers(self) -> list:
        return self.net1 + self.net2

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers() for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers() for g in layer.grads()]


class Receiver:
    """Channel output (+ CSI side inputs) -> per-bit probabilities."""

    def __init__(self, n_bits: int, n_extras: int, flags: AblationFlags,
                 hidden_width: int, n_res_blocks: int, rng: np.random.Generator):
        self.n_bits = n_bits
        self.n_extras = n_extras
        self.bpn = nn.BatchPowerNorm(2)
        self.net = [nn.Dense(2 + n_extras, hidden_width, nn.TANH, rng)]
        for _ in range(n_res_blocks):
            block = nn.Dense(hidden_width, hidden_width, nn.TANH, rng)
            self.net.append(nn.Residual(block) if flags.use_shortcuts else block)
        self.net.append(nn.Dense(hidden_width, n_bits, nn.SIGMOID, rng))
        self._eta = None

    def forward(self, y: np.ndarray, extras: list[float], eta: float,
                training: bool) -> np.ndarray:
        if len(extras) != self.n_extras:
            raise ValueError(f"expected {self.n_extras} side inputs, got {len(extras)}")
        yd = self.bpn.forward(y, training) * eta
        if extras:
            cols = [yd] + [np.full((y.shape[0], 1), v) for v in extras]
            x = np.concatenate(cols, axis=1)
        else:
            x = yd
        for layer in self.net:
            x = layer.forward(x)
        self._eta = eta
        return x

    def backward(self, grad_probs: np.ndarray) -> np.ndarray:
        g = grad_probs
        for layer in reversed(self.net):
            g = layer.backward(g)
        return self.bpn.backward(g[:, :2] * self._eta)

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.net for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.net for g in layer.grads()]


class ZicAutoencoder:
    """The four jointly trained networks plus everything needed to reuse them."""

    def __init__(self, cfg: TrainConfig, rng: np.random.Generator):
        self.n_bits = cfg.n_bits
        self.flags = cfg.flags
        self.csi_mode = cfg.csi_mode
        self.alpha_min = cfg.alpha_min
        self.alpha_max = cfg.alpha_max
        self.total_power = cfg.total_power
        self.train_snr_db = cfg.train_snr_db
        self.hidden_width = cfg.hidden_width
        self.n_res_blocks = cfg.n_res_blocks
        self.subnet2_width = cfg.subnet2_width

        shared = (cfg.n_bits, cfg.flags, cfg.total_power, cfg.hidden_width,
                  cfg.n_res_blocks, cfg.subnet2_width)
        self.tx1 = Transmitter(*shared, rng=rng)
        self.tx2 = Transmitter(*shared, rng=rng)
        rx1_extras = (1 if cfg.flags.alpha_to_rx else 0) + (1 if cfg.csi_mode == IMPERFECT else 0)
        rx2_extras = 1 if cfg.flags.alpha_to_rx else 0
        self.rx1 = Receiver(cfg.n_bits, rx1_extras, cfg.flags, cfg.hidden_width,
                            cfg.n_res_blocks, rng)
        self.rx2 = Receiver(cfg.n_bits, rx2_extras, cfg.flags, cfg.hidden_width,
                            cfg.n_res_blocks, rng)
        self._H = None

    # -- wiring -----------------------------------------------------------

    def _rx_extras(self, knows: CsiInputs) -> tuple[list[float], list[float]]:
        extras1 = [knows.sa_rx1] if self.flags.alpha_to_rx else []
        if self.csi_mode == IMPERFECT:
            if knows.theta_delta is None:
                raise ValueError("imperfect mode needs theta_delta")
            extras1 = extras1 + [knows.theta_delta]
        extras2 = [knows.sa_rx2] if self.flags.alpha_to_rx else []
        return extras1, extras2

    def forward(self, bits1: np.ndarray, bits2: np.ndarray, eq: EquivalentChannel,
                knows: CsiInputs, noise_var: float,
                rng: np.random.Generator | None, training: bool = True
                ) -> tuple[np.ndarray, np.ndarray]:
        """Full system pass; returns the two receivers' bit probabilities.

        ``noise_var`` is the nominal (pre-normalization) noise power used for
        the desired-signal scaling; the actual injected noise follows the
        per-receiver variances of ``eq``.  ``rng=None`` disables noise.
        """
        x1 = self.tx1.forward(bits1, knows.sa_tx, training)
        x2 = self.tx2.forward(bits2, knows.sa_tx, training)
        H11 = _complex_matrix(eq.hbar11)
        H21 = _complex_matrix(eq.hbar21)
        H22 = _complex_matrix(eq.hbar22)
        y1 = nn.gaussian_noise(x1 @ H11.T + x2 @ H21.T, eq.noise_var_rx1 / 2.0, rng)
        y2 = nn.gaussian_noise(x2 @ H22.T, eq.noise_var_rx2 / 2.0, rng)
        eta1 = receiver_scale((1.0 + knows.sa_rx1**2) * self.total_power, noise_var)
        eta2 = receiver_scale(self.total_power, noise_var)
        extras1, extras2 = self._rx_extras(knows)
        p1 = self.rx1.forward(y1, extras1, eta1, training)
        p2 = self.rx2.forward(y2, extras2, eta2, training)
        self._H = (H11, H21, H22)
        return p1, p2

    def backward(self, bits1: np.ndarray, bits2: np.ndarray,
                 p1: np.ndarray, p2: np.ndarray) -> None:
        """Backpropagate the summed cross-entropy of the latest forward pass."""
        H11, H21, H22 = self._H
        gy1 = self.rx1.backward(nn.bce_loss_grad(bits1, p1))
        gy2 = self.rx2.backward(nn.bce_loss_grad(bits2, p2))
        self.tx1.backward(gy1 @ H11)
        self.tx2.backward(gy1 @ H21 + gy2 @ H22)

    def params(self) -> list[np.ndarray]:
        return (self.tx1.params() + self.tx2.params()
                + self.rx1.params() + self.rx2.params())

    def grads(self) -> list[np.ndarray]:
        return (self.tx1.grads() + self.tx2.grads()
                + self.rx1.grads() + self.rx2.grads())

    def arch_descriptor(self) -> str:
        """Canonical architecture string (hashed into model files)."""
        f = self.flags
        return ("zicae-v1"
                f"|bits={self.n_bits}|mode={self.csi_mode}"
                f"|hw={self.hidden_width}|res={self.n_res_blocks}|sw={self.subnet2_width}"
                f"|short={int(f.use_shortcuts)}|a1={int(f.alpha_to_subnet1)}"
                f"|a2={int(f.alpha_to_subnet2)}|arx={int(f.alpha_to_rx)}"
                f"|sn2={int(f.use_subnet2)}")

    # -- frozen-model use --------------------------------------------------

    def covers(self, alpha: float) -> bool:
        return self.alpha_min <= alpha <= self.alpha_max

    def transmit(self, bits1: np.ndarray, bits2: np.ndarray,
                 sa_tx: float) -> tuple[np.ndarray, np.ndarray]:
        """Inference-mode encoding to complex symbols."""
        x1 = self.tx1.forward(bits1, sa_tx, training=False)
        x2 = self.tx2.forward(bits2, sa_tx, training=False)
        return x1[:, 0] + 1j * x1[:, 1], x2[:, 0] + 1j * x2[:, 1]

    def receive(self, y1: np.ndarray, y2: np.ndarray, knows: CsiInputs,
                noise_var: float) -> tuple[np.ndarray, np.ndarray]:
        """Inference-mode decoding of complex channel outputs to hard bits."""
        y1r = np.stack([y1.real, y1.imag], axis=1)
        y2r = np.stack([y2.real, y2.imag], axis=1)
        eta1 = receiver_scale((1.0 + knows.sa_rx1**2) * self.total_power, noise_var)
        eta2 = receiver_scale(self.total_power, noise_var)
        extras1, extras2 = self._rx_extras(knows)
        p1 = self.rx1.forward(y1r, extras1, eta1, training=False)
        p2 = self.rx2.forward(y2r, extras2, eta2, training=False)
        return (p1 > 0.5).astype(int), (p2 > 0.5).astype(int)


def encode_constellation(model: ZicAutoencoder, sqrt_alpha: float
                         ) -> tuple[Constellation, Constellation]:
    """Enumerate every bit pattern through the frozen transmitters."""
    all_bits = index_to_bits(np.arange(1 << model.n_bits), model.n_bits).astype(float)
    x1, x2 = model.transmit(all_bits, all_bits, sqrt_alpha)
    return (
        Constellation(x1, model.n_bits, float(np.mean(np.abs(x1) ** 2))),
        Constellation(x2, model.n_bits, float(np.mean(np.abs(x2) ** 2))),
    )


def _perfect_channel(alpha: float, dist: ChannelDistribution, noise_var: float,
                     rng: np.random.Generator) -> tuple[EquivalentChannel, CsiInputs]:
    """Per-channel setup of the training loop under perfect CSI."""
    ch = draw_channel(dist, rng)
    sa = math.sqrt(alpha)
    eq = EquivalentChannel(
        hbar11=1.0 + 0j, hbar21=complex(sa), hbar22=1.0 + 0j, sqrt_alpha=sa,
        noise_var_rx1=noise_var / abs(ch.h11) ** 2,
        noise_var_rx2=noise_var / abs(ch.h22) ** 2,
    )
    return eq, CsiInputs(sa_tx=sa, sa_rx1=sa, sa_rx2=sa)


def _imperfect_channel(alpha: float, dist: ChannelDistribution,
                       est_cfg: EstimationConfig, n_q: int, noise_var: float,
                       rng: np.random.Generator) -> tuple[EquivalentChannel, CsiInputs]:
    """Per-channel setup with estimation errors and a simulated feedback residual.

    The residual angle is drawn uniformly from +-pi/2**n_q (the quantizer's
    half segment) instead of quantizing a concrete phase; evaluation uses the
    real quantizer.
    """
    ch, est = draw_accepted_estimate(dist, alpha, est_cfg, rng)
    theta_delta = rng.uniform(-math.pi / 2**n_q, math.pi / 2**n_q)
    alpha_q = quantize(alpha_quantizer(n_q), est.alpha_hat)
    fb = FeedbackMessage(alpha_q=alpha_q, theta_q=est.theta_hat + theta_delta,
                         theta_delta=theta_delta)
    eq = normalize_imperfect(est, fb, ch, noise_var)
    return eq, CsiInputs(sa_tx=math.sqrt(alpha_q), sa_rx1=math.sqrt(est.alpha_hat),
                         sa_rx2=math.sqrt(alpha_q), theta_delta=theta_delta)


def train(cfg: TrainConfig) -> tuple[ZicAutoencoder, list[dict]]:
    """Run the channel-iteration training schedule.

    Returns the trained model and a log with one row per channel:
    ``{"channel", "alpha", "loss", "lr"}`` where loss is the mean over that
    channel's epochs.  Deterministic given (cfg, cfg.seed).
    """
    ss = np.random.SeedSequence(cfg.seed)
    rng_init, rng_channel, rng_data = (np.random.default_rng(s) for s in ss.spawn(3))
    model = ZicAutoencoder(cfg, rng_init)
    opt = nn.Adam(model.params(), lr=cfg.lr, decay=cfg.decay)
    dist = ChannelDistribution(cfg.mu_h, cfg.sigma_h2)
    est_cfg = EstimationConfig(cfg.sigma_e2, cfg.threshold_t)
    noise_var = cfg.noise_var
    log: list[dict] = []

    for i_ch in range(cfg.n_channels):
        alpha = rng_channel.uniform(cfg.alpha_min, cfg.alpha_max)
        if cfg.csi_mode == PERFECT:
            eq, knows = _perfect_channel(alpha, dist, noise_var, rng_channel)
        else:
            eq, knows = _imperfect_channel(alpha, dist, est_cfg, cfg.n_q,
                                           noise_var, rng_channel)
        losses = []
        for i_ep in range(cfg.epochs_per_channel):
            bits1 = rng_data.integers(0, 2, size=(cfg.batch, cfg.n_bits)).astype(float)
            bits2 = rng_data.integers(0, 2, size=(cfg.batch, cfg.n_bits)).astype(float)
            p1, p2 = model.forward(bits1, bits2, eq, knows, noise_var, rng_data)
            loss = nn.bce_loss(bits1, p1) + nn.bce_loss(bits2, p2)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at channel {i_ch}, epoch {i_ep}, "
                    f"alpha={alpha:.4f}, lr={opt.lr:.3e}")
            model.backward(bits1, bits2, p1, p2)
            opt.step(model.grads())
            losses.append(loss)
        if (i_ch + 1) % cfg.decay_every == 0:
            opt.decay_lr()
        log.append({"channel": i_ch, "alpha": alpha,
                    "loss": float(np.mean(losses)), "lr": opt.lr})
    return model, log


ABLATION_EXPERIMENTS: dict[str, AblationFlags] = {
    "proposed": AblationFlags(),
    "exp1": AblationFlags(use_shortcuts=False),
    "exp2": AblationFlags(alpha_to_subnet1=False),
    "exp3": AblationFlags(alpha_to_subnet2=False),
    "exp4": AblationFlags(alpha_to_subnet1=False, alpha_to_subnet2=False),
    "exp5": AblationFlags(alpha_to_rx=False),
    "exp6": AblationFlags(alpha_to_subnet2=False, use_subnet2=False),
}


def flags_as_dict(flags: AblationFlags) -> dict:
    return asdict(flags)
