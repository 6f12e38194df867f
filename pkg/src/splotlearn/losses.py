"""Value-and-gradient objectives for training on weighted or labeled events.

All objectives consume raw model logits ``z``; the sigmoid lives inside the
loss so each can use a numerically stable log-sum form.  Per-event terms are
summed, not averaged — the trainer divides by the batch size.  Gradients are
with respect to the logits, one entry per event.

Two of the objectives are safe on weighted data with negative entries:

* ``constrained_mse`` regresses the sigmoid output directly onto the signal
  weights and is bounded below by 0 for any weights.
* ``exact_likelihood`` scores the per-event mass densities mixed by the model
  output and never touches weights at all.

``weighted_ce`` is the conventional two-entry weighted cross-entropy; with a
negative weight it has no lower bound, which is exactly the failure mode the
other two objectives avoid.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

# Mixed-density bracket values are clipped here before the log; keeps the
# likelihood finite when the model saturates against a zero density.
LIKELIHOOD_FLOOR = 1e-30


class LossInputError(ValueError):
    """Per-event auxiliary inputs violate a loss precondition."""


class LossKind(Enum):
    """The trainable objectives and the event columns each one consumes."""

    CONSTRAINED_MSE = "constrained_mse"
    EXACT_LIKELIHOOD = "exact_likelihood"
    WEIGHTED_CE = "weighted_ce"
    PLAIN_CE = "plain_ce"

    @property
    def required_columns(self) -> tuple[str, ...]:
        return _REQUIRED_COLUMNS[self]


_REQUIRED_COLUMNS = {
    LossKind.CONSTRAINED_MSE: ("sweights",),
    LossKind.EXACT_LIKELIHOOD: ("ps", "pb"),
    LossKind.WEIGHTED_CE: ("sweights",),
    LossKind.PLAIN_CE: ("y",),
}


@dataclass
class LossEval:
    """Total loss value and the per-event gradient w.r.t. the raw logit."""

    loss: float
    grad: np.ndarray


def _softplus(z):
    return np.logaddexp(0.0, z)


def constrained_mse(z, w) -> LossEval:
    """Mean-square regression of the sigmoid output onto per-event weights.

    ``loss = sum_i (w_i - sigmoid(z_i))^2``.  Weights may be negative or
    exceed 1; the loss is bounded below by 0 regardless.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    s = expit(z)
    r = w - s
    grad = -2.0 * r * s * expit(-z)
    return LossEval(float(np.sum(r * r)), grad)


def exact_likelihood(z, ps, pb) -> LossEval:
    """Negative log-likelihood of the model-mixed per-event mass densities.

    ``loss = -sum_i log[sigmoid(z_i) ps_i + (1 - sigmoid(z_i)) pb_i]`` with the
    bracket floored at ``LIKELIHOOD_FLOOR``.  Any L2 regularization is the
    trainer's business, not part of the data term.
    """
    z = np.asarray(z, dtype=float)
    ps = np.asarray(ps, dtype=float)
    pb = np.asarray(pb, dtype=float)
    if np.any(ps < 0) or np.any(pb < 0):
        raise LossInputError("density columns must be non-negative")
    dead = np.flatnonzero((ps <= 0) & (pb <= 0))
    if dead.size:
        raise LossInputError(f"events with zero density under both species: indices {dead.tolist()[:20]}")
    s = expit(z)
    s_comp = expit(-z)  # 1 - sigmoid(z) without cancellation
    bracket = np.maximum(s * ps + s_comp * pb, LIKELIHOOD_FLOOR)
    grad = -(ps - pb) * s * s_comp / bracket
    return LossEval(float(-np.sum(np.log(bracket))), grad)


def weighted_ce(z, ws, wb) -> LossEval:
    """Two-entry cross-entropy: each event counted as signal with ``ws`` and background with ``wb``.

    ``loss = sum_i [-ws_i log sigmoid(z_i) - wb_i log(1 - sigmoid(z_i))]``,
    evaluated through softplus.  A negative weight removes the lower bound;
    that unboundedness is documented behavior, not an error.
    """
    z = np.asarray(z, dtype=float)
    ws = np.asarray(ws, dtype=float)
    wb = np.asarray(wb, dtype=float)
    loss = float(np.sum(ws * _softplus(-z) + wb * _softplus(z)))
    grad = (ws + wb) * expit(z) - ws
    return LossEval(loss, grad)


def plain_ce(z, y) -> LossEval:
    """Standard binary cross-entropy against labels in {0, 1}."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((y != 0.0) & (y != 1.0)):
        raise LossInputError("labels must be 0 or 1")
    loss = float(np.sum(_softplus(z) - y * z))
    grad = expit(z) - y
    return LossEval(loss, grad)
