"""Exclusionary soft masks and the losses they route.

Tensors are float64 arrays shaped ``(H, W, C)``. Every loss returns its value
together with analytic gradients so callers can verify them against finite
differences (see :mod:`srdistill.gradcheck`).

Discriminator scores are supplied by the caller. The composite loss returns
the masked branch outputs so a caller-side discriminator can score them and
chain the score gradients back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

LOG_FLOOR = 1e-12
_LOG_FLOOR_LN = float(np.log(LOG_FLOOR))


def _as_tensor(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"{name} must be an (H, W, C) tensor, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _same_shape(*pairs):
    shapes = {a.shape for a, _ in pairs}
    if len(shapes) != 1:
        raise ValueError("shape mismatch: " + ", ".join(f"{n}={a.shape}" for a, n in pairs))


# ---------------------------------------------------------------- masks


def softmax_mask(m) -> np.ndarray:
    """Per-pixel softmax across channels, computed with max subtraction."""
    z = _as_tensor(m, "mask logits")
    if z.shape[2] < 2:
        raise ValueError("softmax mask needs at least 2 channels")
    e = np.exp(z - z.max(axis=2, keepdims=True))
    return e / e.sum(axis=2, keepdims=True)


def softmax_mask_jvp(m, v) -> np.ndarray:
    """Directional derivative of :func:`softmax_mask` at ``m`` along ``v``."""
    s = softmax_mask(m)
    v = np.asarray(v, dtype=np.float64)
    return s * (v - (s * v).sum(axis=2, keepdims=True))


# the softmax Jacobian is symmetric, so the pullback has the same form
softmax_mask_vjp = softmax_mask_jvp


def complement_mask(m_alpha) -> np.ndarray:
    return 1.0 - np.asarray(m_alpha, dtype=np.float64)


# ---------------------------------------------------------------- feature maps


class FeatureExtractor(Protocol):
    def __call__(self, x: np.ndarray) -> np.ndarray: ...

    def vjp(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Pull a feature-space cotangent ``g`` back to input space at ``x``."""
        ...


class IdentityExtractor:
    def __call__(self, x):
        return np.asarray(x, dtype=np.float64)

    def vjp(self, x, g):
        return np.asarray(g, dtype=np.float64)

    def jvp(self, x, v):
        return np.asarray(v, dtype=np.float64)


def _conv3x3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    # zero-padded 'same' correlation; weight is (3, 3, C_in, C_out)
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(0, 1))
    return np.einsum("hwcij,ijco->hwo", win, weight) + bias


def _conv3x3_t(g: np.ndarray, weight: np.ndarray) -> np.ndarray:
    h, w, _ = g.shape
    out = np.zeros((h + 2, w + 2, weight.shape[2]))
    for i in range(3):
        for j in range(3):
            out[i : i + h, j : j + w] += g @ weight[i, j].T
    return out[1:-1, 1:-1]


class ConvFeatureExtractor:
    """Two 3x3 convolutions with a tanh between them, weights fixed by ``seed``.

    A deterministic, smooth stand-in for a pretrained feature network.
    """

    def __init__(self, in_channels: int = 3, hidden: int = 8, out_channels: int = 4, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.w1 = rng.normal(0.0, 1.0 / np.sqrt(9 * in_channels), (3, 3, in_channels, hidden))
        self.b1 = rng.normal(0.0, 0.1, hidden)
        self.w2 = rng.normal(0.0, 1.0 / np.sqrt(9 * hidden), (3, 3, hidden, out_channels))
        self.b2 = rng.normal(0.0, 0.1, out_channels)

    def _hidden(self, x):
        return np.tanh(_conv3x3(np.asarray(x, dtype=np.float64), self.w1, self.b1))

    def __call__(self, x):
        return _conv3x3(self._hidden(x), self.w2, self.b2)

    def vjp(self, x, g):
        a = self._hidden(x)
        ga = _conv3x3_t(np.asarray(g, dtype=np.float64), self.w2) * (1.0 - a * a)
        return _conv3x3_t(ga, self.w1)

    def jvp(self, x, v):
        a = self._hidden(x)
        da = _conv3x3(np.asarray(v, dtype=np.float64), self.w1, 0.0) * (1.0 - a * a)
        return _conv3x3(da, self.w2, 0.0)


# ---------------------------------------------------------------- losses


def pixel_loss(sr, hr) -> tuple[float, np.ndarray]:
    """Mean absolute error and its subgradient w.r.t. ``sr`` (``sign(0) = 0``)."""
    sr, hr = _as_tensor(sr, "sr"), _as_tensor(hr, "hr")
    _same_shape((sr, "sr"), (hr, "hr"))
    d = sr - hr
    return float(np.abs(d).mean()), np.sign(d) / d.size


def perceptual_loss(sr, hr, f: FeatureExtractor) -> tuple[float, np.ndarray]:
    """Mean absolute error between ``f(sr)`` and ``f(hr)``."""
    sr, hr = _as_tensor(sr, "sr"), _as_tensor(hr, "hr")
    _same_shape((sr, "sr"), (hr, "hr"))
    value, g_feat = pixel_loss(f(sr), f(hr))
    return value, f.vjp(sr, g_feat)


def _log_sigmoid_floored(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # log(max(sigmoid(x), floor)) and its derivative
    ls = -np.logaddexp(0.0, -x)
    floored = ls < _LOG_FLOOR_LN
    deriv = np.where(floored, 0.0, 1.0 / (1.0 + np.exp(np.clip(x, -700, 700))))
    return np.where(floored, _LOG_FLOOR_LN, ls), deriv


def adversarial_loss(d_sr, d_hr) -> tuple[float, np.ndarray, np.ndarray]:
    """Relativistic average loss on discriminator scores.

    ``mean_i[-log(1 - sigmoid(d_hr[i] - mean(d_sr))) - log(sigmoid(d_sr[i] - mean(d_hr)))]``
    with log arguments floored at :data:`LOG_FLOOR`.

    Returns
    -------
    loss, grad_d_sr, grad_d_hr
    """
    d_sr = np.asarray(d_sr, dtype=np.float64).ravel()
    d_hr = np.asarray(d_hr, dtype=np.float64).ravel()
    if d_sr.size == 0 or d_hr.size == 0:
        raise ValueError("score lists must be non-empty")
    if d_sr.size != d_hr.size:
        raise ValueError(f"score lists differ in length: {d_sr.size} vs {d_hr.size}")
    if not (np.all(np.isfinite(d_sr)) and np.all(np.isfinite(d_hr))):
        raise ValueError("scores must be finite")
    n = d_sr.size
    a = d_hr - d_sr.mean()
    b = d_sr - d_hr.mean()
    # 1 - sigmoid(a) = sigmoid(-a)
    la, da = _log_sigmoid_floored(-a)
    lb, db = _log_sigmoid_floored(b)
    loss = float(np.mean(-la - lb))
    # d(-la)/da = da ; d(-lb)/db = -db
    g_a = da / n
    g_b = -db / n
    grad_hr = g_a - g_b.sum() / n
    grad_sr = g_b - g_a.sum() / n
    return loss, grad_sr, grad_hr


@dataclass(frozen=True)
class LossWeights:
    alpha: float  # adversarial
    beta: float  # perceptual
    gamma: float  # pixel

    def __post_init__(self):
        w = (self.alpha, self.beta, self.gamma)
        if min(w) < 0 or not any(v > 0 for v in w):
            raise ValueError(f"loss weights must be non-negative with one positive, got {w}")


@dataclass
class LossResult:
    total: float
    adversarial: float
    perceptual: float
    pixel: float
    grad_d_sr: np.ndarray
    grad_d_hr: np.ndarray


@dataclass
class BaselineResult(LossResult):
    grad_sr: np.ndarray


@dataclass
class EDLResult(LossResult):
    grad_x: np.ndarray
    grad_y: np.ndarray
    grad_mask: np.ndarray
    masked_x: np.ndarray
    masked_y: np.ndarray


def weighted_baseline_loss(sr, hr, w: LossWeights, f: FeatureExtractor, d_sr, d_hr) -> BaselineResult:
    """Fixed-weight sum ``alpha*adv + beta*per + gamma*pix`` on a single output.

    ``grad_sr`` covers the perceptual and pixel terms; the adversarial term
    reaches ``sr`` only through the caller's discriminator, via the score
    gradients.
    """
    adv, g_dsr, g_dhr = adversarial_loss(d_sr, d_hr)
    per, g_per = perceptual_loss(sr, hr, f)
    pix, g_pix = pixel_loss(sr, hr)
    total = w.alpha * adv + w.beta * per + w.gamma * pix
    return BaselineResult(
        total, adv, per, pix, w.alpha * g_dsr, w.alpha * g_dhr, w.beta * g_per + w.gamma * g_pix
    )


def edl_composite_loss(i_x, i_y, m_alpha, hr, f: FeatureExtractor, d_sr, d_hr) -> EDLResult:
    """Unit-weighted exclusionary loss over two refinement branches.

    With ``m_beta = 1 - m_alpha``:

    * adversarial term on the scores of ``m_alpha * i_x`` (supplied as ``d_sr``),
    * perceptual term on ``m_alpha * i_x + m_beta * i_y`` against ``hr``,
    * pixel term on ``m_beta * i_y`` against ``hr``.
    """
    i_x, i_y = _as_tensor(i_x, "i_x"), _as_tensor(i_y, "i_y")
    m_a, hr = _as_tensor(m_alpha, "m_alpha"), _as_tensor(hr, "hr")
    _same_shape((i_x, "i_x"), (i_y, "i_y"), (m_a, "m_alpha"), (hr, "hr"))
    m_b = complement_mask(m_a)

    masked_x = m_a * i_x
    masked_y = m_b * i_y
    adv, g_dsr, g_dhr = adversarial_loss(d_sr, d_hr)
    per, g_z = perceptual_loss(masked_x + masked_y, hr, f)
    pix, g_p = pixel_loss(masked_y, hr)

    grad_x = m_a * g_z
    grad_y = m_b * (g_z + g_p)
    grad_mask = i_x * g_z - i_y * (g_z + g_p)
    return EDLResult(adv + per + pix, adv, per, pix, g_dsr, g_dhr, grad_x, grad_y, grad_mask, masked_x, masked_y)
