"""Z-interference channel models with perfect and imperfect CSI.

The physical channel has two transmitter/receiver pairs where only receiver 1
is interfered (Tx2 -> Rx1).  All simulation runs on the *equivalent* model:
unit direct gains, a real nonnegative cross gain sqrt(alpha) (perfect CSI) or
a complex cross gain carrying estimation/quantization residuals (imperfect
CSI), and per-receiver noise variances scaled by the inverse squared direct
gains.

Complex Gaussian convention: CN(mu, var) has independent real/imaginary parts,
each N(Re/Im(mu), var/2).

Every operation is pure given an explicit ``numpy.random.Generator``; callers
own their streams, so everything here is safe to use from parallel workers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np


class DegenerateChannelError(ValueError):
    """Raised when a direct channel gain is zero and cannot be normalized out."""


@dataclass(frozen=True)
class ChannelDistribution:
    """Complex Gaussian law of the direct links (mean mu_h, variance sigma_h2)."""

    mu_h: complex = 1.0
    sigma_h2: float = 0.1

    def __post_init__(self):
        if self.sigma_h2 < 0:
            raise ValueError(f"sigma_h2 must be >= 0, got {self.sigma_h2}")


@dataclass(frozen=True)
class ChannelRealization:
    """Raw complex gains of one channel use; h21 is the only cross link."""

    h11: complex
    h21: complex
    h22: complex


@dataclass(frozen=True)
class EquivalentChannel:
    """Normalized channel actually simulated.

    Perfect CSI: hbar11 = hbar22 = 1 and hbar21 = sqrt_alpha (real >= 0).
    Imperfect CSI: the gains carry estimation-error and residual-phase terms.
    ``sqrt_alpha`` is the cross-gain magnitude ratio the receivers assume.
    """

    hbar11: complex
    hbar21: complex
    hbar22: complex
    sqrt_alpha: float
    noise_var_rx1: float
    noise_var_rx2: float


@dataclass(frozen=True)
class EstimationConfig:
    """Estimation-error variance and the keep/reject threshold for channels."""

    sigma_E2: float
    threshold_T: float = 1.0

    def __post_init__(self):
        if self.sigma_E2 < 0:
            raise ValueError(f"sigma_E2 must be >= 0, got {self.sigma_E2}")
        if self.threshold_T <= 0:
            raise ValueError(f"threshold_T must be > 0, got {self.threshold_T}")


@dataclass(frozen=True)
class EstimatedChannel:
    """Estimated gains, their errors (true h = hhat + eps), and derived CSI.

    alpha_hat is the interference intensity receiver 1 assumes and theta_hat
    the phase difference it feeds back, wrapped to [-pi, pi).
    """

    hhat11: complex
    hhat21: complex
    hhat22: complex
    eps11: complex
    eps21: complex
    eps22: complex
    alpha_hat: float
    theta_hat: float


@dataclass(frozen=True)
class Quantizer:
    """Uniform midpoint quantizer over [lo, hi] with 2**n_bits segments.

    Segments are half-open [lo + k*w, lo + (k+1)*w), the last one closed;
    out-of-range inputs clamp to the nearest end segment.  The output is
    always the midpoint of the selected segment.
    """

    n_bits: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError(f"n_bits must be >= 1, got {self.n_bits}")
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got [{self.lo}, {self.hi}]")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (1 << self.n_bits)

    def __call__(self, value: float) -> float:
        return quantize(self, value)


@dataclass(frozen=True)
class FeedbackMessage:
    """Quantized CSI sent by Rx1; theta_delta is known only at Rx1."""

    alpha_q: float
    theta_q: float
    theta_delta: float


def alpha_quantizer(n_bits: int) -> Quantizer:
    """Quantizer for the interference intensity, range [0, 3]."""
    return Quantizer(n_bits, 0.0, 3.0)


def theta_quantizer(n_bits: int) -> Quantizer:
    """Quantizer for the feedback angle, range [-pi, pi]."""
    return Quantizer(n_bits, -math.pi, math.pi)


def complex_gaussian(rng: np.random.Generator, mean: complex = 0.0,
                     var: float = 1.0, size=None):
    """Draw CN(mean, var): each real component N(.., var/2).

    Returns a python complex for ``size=None``, else a complex ndarray.
    """
    scale = math.sqrt(var / 2.0) if var > 0 else 0.0
    if size is None:
        re, im = rng.standard_normal(2)
        return complex(mean) + scale * complex(re, im)
    z = rng.standard_normal((size, 2))
    return complex(mean) + scale * (z[:, 0] + 1j * z[:, 1])


def draw_channel(dist: ChannelDistribution, rng: np.random.Generator) -> ChannelRealization:
    """Draw the direct gains h11, h22 from ``dist``; h21 is left at zero.

    The cross link is interference-intensity driven and is set separately,
    see :func:`draw_interference` / :func:`draw_zic_channel`.
    """
    h11 = complex_gaussian(rng, dist.mu_h, dist.sigma_h2)
    h22 = complex_gaussian(rng, dist.mu_h, dist.sigma_h2)
    return ChannelRealization(h11=h11, h21=0j, h22=h22)


def draw_interference(alpha: float, rng: np.random.Generator) -> complex:
    """Cross gain sqrt(alpha)*e^{j*theta} with theta uniform on [0, 2*pi)."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return math.sqrt(alpha) * cmath.exp(1j * theta)


def draw_zic_channel(dist: ChannelDistribution, alpha: float,
                     rng: np.random.Generator) -> ChannelRealization:
    """Full ZIC realization: random direct gains plus the alpha-driven cross link."""
    ch = draw_channel(dist, rng)
    return replace(ch, h21=draw_interference(alpha, rng))


def normalize_perfect(ch: ChannelRealization, noise_var: float) -> EquivalentChannel:
    """Equivalent model under perfect CSI.

    Tx2 pre-rotates to align the cross-link phase with the direct one and both
    receivers divide by their direct gain, leaving unit direct gains, a real
    cross gain r21/r11 and noise variances noise_var/|hii|^2.
    """
    r11 = abs(ch.h11)
    r22 = abs(ch.h22)
    if r11 == 0.0 or r22 == 0.0:
        raise DegenerateChannelError("direct gain is zero; channel cannot be normalized")
    sqrt_alpha = abs(ch.h21) / r11
    return EquivalentChannel(
        hbar11=1.0 + 0j,
        hbar21=complex(sqrt_alpha),
        hbar22=1.0 + 0j,
        sqrt_alpha=sqrt_alpha,
        noise_var_rx1=noise_var / r11**2,
        noise_var_rx2=noise_var / r22**2,
    )


def _wrap_angle(theta: float) -> float:
    """Wrap to [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def estimate_with_errors(ch: ChannelRealization, eps11: complex, eps21: complex,
                         eps22: complex) -> EstimatedChannel:
    """Deterministic core of :func:`estimate`: hhat_ij = h_ij - eps_ij."""
    hhat11 = ch.h11 - eps11
    hhat21 = ch.h21 - eps21
    hhat22 = ch.h22 - eps22
    r11 = abs(hhat11)
    alpha_hat = (abs(hhat21) / r11) ** 2 if r11 > 0 else math.inf
    theta_hat = _wrap_angle(cmath.phase(hhat11) - cmath.phase(hhat21))
    return EstimatedChannel(hhat11, hhat21, hhat22, eps11, eps21, eps22,
                            alpha_hat, theta_hat)


def estimate(ch: ChannelRealization, cfg: EstimationConfig,
             rng: np.random.Generator) -> EstimatedChannel:
    """Receiver-side channel estimate with CN(0, sigma_E2) additive errors."""
    eps11 = complex_gaussian(rng, 0.0, cfg.sigma_E2)
    eps21 = complex_gaussian(rng, 0.0, cfg.sigma_E2)
    eps22 = complex_gaussian(rng, 0.0, cfg.sigma_E2)
    return estimate_with_errors(ch, eps11, eps21, eps22)


def accept_channel(est: EstimatedChannel, cfg: EstimationConfig) -> bool:
    """Keep the channel only if no error-to-estimate ratio reaches the threshold."""
    ratios = (
        abs(est.eps11 / est.hhat11),
        abs(est.eps22 / est.hhat22),
        abs(est.eps21 / est.hhat11),
    )
    return max(ratios) < cfg.threshold_T


def quantize(q: Quantizer, value: float) -> float:
    """Midpoint of the segment containing ``value`` (clamped into range)."""
    n_seg = 1 << q.n_bits
    w = q.step
    k = int(math.floor((value - q.lo) / w))
    k = min(max(k, 0), n_seg - 1)
    return q.lo + (k + 0.5) * w


def make_feedback(est: EstimatedChannel, q_alpha: Quantizer,
                  q_theta: Quantizer) -> FeedbackMessage:
    """Quantize (alpha_hat, theta_hat) for feedback; record the angle residual."""
    alpha_q = quantize(q_alpha, est.alpha_hat)
    theta_q = quantize(q_theta, est.theta_hat)
    return FeedbackMessage(alpha_q=alpha_q, theta_q=theta_q,
                           theta_delta=theta_q - est.theta_hat)


def normalize_imperfect(est: EstimatedChannel, fb: FeedbackMessage,
                        true_ch: ChannelRealization | None,
                        noise_var: float) -> EquivalentChannel:
    """Equivalent model when nodes equalize with estimated gains.

    Direct gains become 1 + eps_ii/hhat_ii, the cross gain
    (rhat21/rhat11)*e^{j*theta_delta} + eps21/hhat11, and noise variances
    scale with the *estimated* direct gains.  ``true_ch``, when given, is
    checked for consistency with the stored estimate.
    """
    if abs(est.hhat11) == 0.0 or abs(est.hhat22) == 0.0:
        raise DegenerateChannelError("estimated direct gain is zero")
    if true_ch is not None:
        for hhat, eps, h in ((est.hhat11, est.eps11, true_ch.h11),
                             (est.hhat21, est.eps21, true_ch.h21),
                             (est.hhat22, est.eps22, true_ch.h22)):
            if abs(hhat + eps - h) > 1e-9 * max(1.0, abs(h)):
                raise ValueError("estimate is inconsistent with the true channel")
    mag_ratio = abs(est.hhat21) / abs(est.hhat11)
    hbar21 = mag_ratio * cmath.exp(1j * fb.theta_delta) + est.eps21 / est.hhat11
    return EquivalentChannel(
        hbar11=1.0 + est.eps11 / est.hhat11,
        hbar21=hbar21,
        hbar22=1.0 + est.eps22 / est.hhat22,
        sqrt_alpha=mag_ratio,
        noise_var_rx1=noise_var / abs(est.hhat11) ** 2,
        noise_var_rx2=noise_var / abs(est.hhat22) ** 2,
    )


def draw_accepted_estimate(dist: ChannelDistribution, alpha: float,
                           cfg: EstimationConfig, rng: np.random.Generator
                           ) -> tuple[ChannelRealization, EstimatedChannel]:
    """Rejection-sample (channel, estimate) pairs until the keep rule passes."""
    while True:
        ch = draw_zic_channel(dist, alpha, rng)
        est = estimate(ch, cfg, rng)
        if abs(est.hhat11) == 0.0 or abs(est.hhat22) == 0.0:
            continue
        if accept_channel(est, cfg):
            return ch, est


def apply_channel(eq: EquivalentChannel, x1, x2, rng: np.random.Generator | None,
                  noise: tuple | None = None):
    """Push symbols through the equivalent channel.

    y1 = hbar11*x1 + hbar21*x2 + n1 and y2 = hbar22*x2 + n2 with ni complex
    Gaussian of variance noise_var_rxi (half per real component).  ``x1``/``x2``
    may be scalars or arrays.  Passing ``noise=(n1, n2)`` injects explicit
    noise samples instead of drawing; ``rng=None`` with no ``noise`` disables
    noise entirely.
    """
    x1 = np.asarray(x1, dtype=complex)
    x2 = np.asarray(x2, dtype=complex)
    y1 = eq.hbar11 * x1 + eq.hbar21 * x2
    y2 = eq.hbar22 * x2
    if noise is not None:
        n1, n2 = noise
        y1 = y1 + n1
        y2 = y2 + n2
    elif rng is not None:
        y1 = y1 + _complex_noise(rng, eq.noise_var_rx1, x1.shape)
        y2 = y2 + _complex_noise(rng, eq.noise_var_rx2, x2.shape)
    return y1, y2


def _complex_noise(rng: np.random.Generator, var: float, shape):
    scale = math.sqrt(var / 2.0) if var > 0 else 0.0
    z = rng.standard_normal((*shape, 2)) if shape else rng.standard_normal(2)
    return scale * (z[..., 0] + 1j * z[..., 1])
