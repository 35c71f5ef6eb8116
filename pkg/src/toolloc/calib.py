"""Multi-label calibration and loss kernels.

Per-class logit shifts that make 0.5 the F1-optimal cut, presence casting,
probability ensembling, the asymmetric focal loss with its analytic gradient,
and median-frequency class weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigError, DegenerateClass, EmptyInput, ShapeError, sigmoid

log = logging.getLogger(__name__)

PROB_EPS = 1e-7


@dataclass(frozen=True)
class AslParams:
    gamma_plus: float = 1.0
    gamma_minus: float = 4.0
    margin: float = 0.05

    def __post_init__(self):
        if self.gamma_plus < 0 or self.gamma_minus < 0:
            raise ConfigError("focusing exponents must be >= 0")
        if not 0.0 <= self.margin < 1.0:
            raise ConfigError("margin must be in [0, 1)")

    @classmethod
    def simplified(cls) -> "AslParams":
        """gamma+ = 0, gamma- = 1, no margin."""
        return cls(0.0, 1.0, 0.0)


@dataclass(frozen=True)
class CalibrationTable:
    shifts: tuple[float, ...]

    def __post_init__(self):
        shifts = tuple(float(s) for s in self.shifts)
        if not all(np.isfinite(shifts)):
            raise ConfigError("calibration shifts must be finite")
        object.__setattr__(self, "shifts", shifts)

    @property
    def classes(self) -> int:
        return len(self.shifts)

    @classmethod
    def zeros(cls, k: int) -> "CalibrationTable":
        return cls((0.0,) * k)


def _matrix(a, name, dtype=np.float64) -> np.ndarray:
    a = np.asarray(a, dtype=dtype)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {a.shape}")
    return a


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def cast_presence(probs, t: float = 0.5) -> np.ndarray:
    """1 where the probability is strictly above ``t``."""
    return (np.asarray(probs, dtype=np.float64) > t).astype(np.int8)


def f1_binary(pred, truth) -> float:
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ShapeError(f"length mismatch: {pred.shape} vs {truth.shape}")
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def _best_logit_cut(z: np.ndarray, y: np.ndarray) -> float:
    """Logit cut ``tau`` maximizing F1 of ``z > tau``.

    Candidates sit midway between consecutive distinct logits, plus one below
    the minimum and one above the maximum.  Among equally good cuts the one
    closest to 0 wins, so a class already optimal at 0.5 keeps its predictions.
    """
    order = np.argsort(-z, kind="stable")
    zs, ys = z[order], y[order]
    n_pos = int(ys.sum())
    distinct = np.concatenate([np.flatnonzero(zs[1:] != zs[:-1]), [zs.size - 1]])
    # predicting the top (j + 1) samples positive, for each group end j
    tp = np.cumsum(ys)[distinct]
    npred = distinct + 1
    f1 = np.concatenate([[0.0], 2.0 * tp / (npred + n_pos)])
    zd = zs[distinct]
    cuts = np.concatenate([[zd[0] + 1.0], (zd[:-1] + zd[1:]) / 2.0, [zd[-1] - 1.0]])
    best = f1.max()
    ties = np.flatnonzero(f1 == best)
    return float(cuts[ties[np.argmin(np.abs(cuts[ties]))]])


def fit_logit_shift(logits, labels, warnings: list[str] | None = None) -> CalibrationTable:
    """Per-class additive logit shifts so that a 0.5 cast maximizes per-class F1.

    Classes without positive labels get a zero shift.
    """
    z = _matrix(logits, "logits")
    y = _matrix(labels, "labels")
    _same_shape(z, y)
    if not np.all(np.isfinite(z)):
        raise ShapeError("logits must be finite")
    shifts = []
    for c in range(z.shape[1]):
        yc = y[:, c] > 0
        if not yc.any():
            msg = f"class {c} has no positive labels; shift left at 0"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            shifts.append(0.0)
            continue
        shifts.append(-_best_logit_cut(z[:, c], yc.astype(np.int64)))
    return CalibrationTable(tuple(shifts))


def apply_calibration(logits, table: CalibrationTable) -> np.ndarray:
    z = _matrix(logits, "logits")
    if z.shape[1] != table.classes:
        raise ShapeError(f"{z.shape[1]} logit columns vs {table.classes} shifts")
    return sigmoid(z + np.asarray(table.shifts)[None, :])


def ensemble_mean(prob_matrices: Sequence) -> np.ndarray:
    if len(prob_matrices) == 0:
        raise EmptyInput("no probability matrices")
    mats = [np.asarray(p, dtype=np.float64) for p in prob_matrices]
    for m in mats[1:]:
        _same_shape(mats[0], m)
    return np.mean(np.stack(mats), axis=0)


def _asl_inputs(probs, labels, params):
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(labels)
    _same_shape(p, y)
    return p, y > 0, params


def asl_loss(probs, labels, params: AslParams = AslParams()) -> tuple[float, np.ndarray]:
    """Asymmetric focal loss summed over all elements, plus the per-element terms.

    Positives: ``-(1-p)**g+ * log(p)``.  Negatives use the shifted probability
    ``pm = max(p - m, 0)``: ``-pm**g- * log(1 - pm)``, so negatives with
    ``p <= m`` contribute exactly zero.
    """
    p, pos, params = _asl_inputs(probs, labels, params)
    pm = np.maximum(p - params.margin, 0.0)
    loss_pos = -np.power(1.0 - p, params.gamma_plus) * np.log(p)
    loss_neg = -np.power(pm, params.gamma_minus) * np.log1p(-pm)
    per = np.where(pos, loss_pos, loss_neg)
    return float(per.sum()), per


def asl_gradient(probs, labels, params: AslParams = AslParams()) -> np.ndarray:
    """d(loss)/dp per element; 0 wherever the shifted negative probability is 0."""
    p, pos, params = _asl_inputs(probs, labels, params)
    gp, gm = params.gamma_plus, params.gamma_minus
    q = 1.0 - p
    # d/dp[-(1-p)^g log p] = g (1-p)^(g-1) log p - (1-p)^g / p
    focus_pos = gp * np.power(q, gp - 1.0) * np.log(p) if gp else 0.0
    grad_pos = focus_pos - np.power(q, gp) / p
    pm = np.maximum(p - params.margin, 0.0)
    live = pm > 0
    safe = np.where(live, pm, 0.5)
    # d/dpm[-pm^g log(1-pm)] = -g pm^(g-1) log(1-pm) + pm^g / (1-pm)
    focus_neg = -gm * np.power(safe, gm - 1.0) * np.log1p(-safe) if gm else 0.0
    grad_neg = np.where(live, focus_neg + np.power(safe, gm) / (1.0 - safe), 0.0)
    return np.where(pos, grad_pos, grad_neg)


def median_freq_weights(class_frequencies) -> np.ndarray:
    """``median(f) / f_c`` per class."""
    f = np.asarray(class_frequencies, dtype=np.float64)
    if f.size == 0:
        raise EmptyInput("no class frequencies")
    if np.any(f <= 0):
        raise DegenerateClass("class frequencies must be positive")
    return np.median(f) / f
