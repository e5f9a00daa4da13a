"""Training losses as plain numpy functions returning ``(loss, gradient)``.

All losses are sums over points; gradients are taken w.r.t. the first
argument.
"""

from __future__ import annotations

import numpy as np

from . import defaults
from .errors import PolytraceError

BCE_CLAMP = 1e-7


def _pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise PolytraceError("shape-mismatch", f"{pred.shape} vs {target.shape}")
    return pred, target


def loss_smooth_l1(pred_offsets, gt_offsets) -> tuple[float, np.ndarray]:
    """Smooth L1 (Huber with unit threshold) summed over every component."""
    pred, target = _pair(pred_offsets, gt_offsets)
    diff = pred - target
    ad = np.abs(diff)
    small = ad < 1.0
    loss = np.where(small, 0.5 * diff * diff, ad - 0.5)
    grad = np.where(small, diff, np.sign(diff))
    return float(loss.sum()), grad


def loss_bce(probs, labels) -> tuple[float, np.ndarray]:
    """Summed binary cross-entropy; probabilities clamped to [1e-7, 1 - 1e-7]."""
    p, c = _pair(probs, labels)
    p = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -(c * np.log(p) + (1.0 - c) * np.log1p(-p))
    grad = -c / p + (1.0 - c) / (1.0 - p)
    return float(loss.sum()), grad


def loss_angle_penalty(thetas, labels, theta_threshold: float = defaults.ANGLE_THRESHOLD,
                       ) -> tuple[float, np.ndarray]:
    """Hinge pushing vertex angles below the threshold and the rest above it.

    The subgradient is taken as zero exactly at the hinge.
    """
    theta, c = _pair(thetas, labels)
    vert = c == 1
    over = theta - theta_threshold
    loss = np.where(vert, np.maximum(0.0, over), np.maximum(0.0, -over))
    grad = np.where(vert, (over > 0).astype(float), -(over < 0).astype(float))
    return float(loss.sum()), grad


def loss_total(l_off: float, l_vert: float, l_angle: float, lambdas=defaults.LOSS_WEIGHTS) -> float:
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.shape != (3,) or np.any(lam < 0):
        raise PolytraceError("invalid-weights", "need three non-negative weights")
    return float(lam[0] * l_off + lam[1] * l_vert + lam[2] * l_angle)


def loss_cross_entropy(pixel_probs, labels, num_classes: int) -> float:
    """Mean per-pixel cross-entropy of ``(N, C)`` probabilities against class ids."""
    probs = np.asarray(pixel_probs, dtype=np.float64).reshape(-1, num_classes)
    labels = np.asarray(labels).reshape(-1)
    if len(labels) != len(probs):
        raise PolytraceError("shape-mismatch", f"{len(probs)} rows vs {len(labels)} labels")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6) or np.any(probs < 0):
        raise PolytraceError("invalid-distribution", "probability rows must sum to 1")
    if np.any((labels < 0) | (labels >= num_classes)):
        raise PolytraceError("invalid-label", "label outside [0, num_classes)")
    picked = probs[np.arange(len(labels)), labels.astype(np.int64)]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(float).tiny))))
