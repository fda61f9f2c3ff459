"""Parameter estimators for the receivers.

Recurrent-network training uses forward-mode sensitivity propagation:
a per-neuron matrix tracks the derivative of every state with respect
to every coefficient of that neuron's weight vector, updated by one
recursion per symbol. Because the split-tanh activation treats real and
imaginary channels separately (it is not complex-differentiable), the
recursion runs in the real-composite representation: states expand to
[Re x; Im x] and each neuron's coefficients to [Re w_j; Im w_j], with
the activation slope 1 - tanh^2 per channel. The complex update
direction recovered from that representation reduces exactly to the
familiar x * conj(e) form when the network is linear, which is what ties
the normalized and set-membership step sizes below to their closed-form
a-posteriori behaviour.

Set-membership variants update only when the a-priori error magnitude
exceeds the bound gamma, with a step that maps the (linearized)
a-posteriori error onto the bound. The feedback-filter update projects
onto the structural zero pattern by using the masked decision vector as
its regressor, which keeps the bound mapping exact.

All functions broadcast over leading batch dimensions.
"""

from dataclasses import dataclass

import numpy as np

from .detector import NEURAL_KINDS

EPS = 1e-8


# ---------------------------------------------------------------------------
# real-composite building blocks
# ---------------------------------------------------------------------------

def activation_slopes(zeta):
    """[1 - tanh^2] per real channel: (..., 2Q) from pre-activations (..., Q)."""
    re = 1.0 - np.tanh(zeta.real) ** 2
    im = 1.0 - np.tanh(zeta.imag) ** 2
    return np.concatenate([re, im], axis=-1)


def recurrent_real_block(weights, n_states):
    """Real-composite matrix of v -> W_x^H v, W_x = the state rows of W.

    Maps [Re v; Im v] to [Re(W_x^H v); Im(W_x^H v)]; shape (..., 2Q, 2Q).
    """
    wx = weights[..., :n_states, :]
    re = np.swapaxes(wx.real, -1, -2)
    im = np.swapaxes(wx.imag, -1, -2)
    top = np.concatenate([re, im], axis=-1)
    bot = np.concatenate([-im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def input_block(xi, n_states):
    """Explicit-derivative blocks U_j: xi enters neuron j's rows only.

    Shape (..., Q, 2Q, 2n): for neuron j, row j is [Re xi, Im xi] and
    row Q+j is [Im xi, -Re xi]; all other rows are zero.
    """
    q = n_states
    n = xi.shape[-1]
    out = np.zeros(xi.shape[:-1] + (q, 2 * q, 2 * n))
    j = np.arange(q)
    out[..., j, j, :n] = xi.real[..., None, :]
    out[..., j, j, n:] = xi.imag[..., None, :]
    out[..., j, q + j, :n] = xi.imag[..., None, :]
    out[..., j, q + j, n:] = -xi.real[..., None, :]
    return out


def zero_sensitivity(batch_shape, n_states, n_inputs):
    """All-zero sensitivity tensor for the start of training."""
    n = n_states + n_inputs
    return np.zeros(batch_shape + (n_states, 2 * n_states, 2 * n))


def sensitivity_update(lam, slopes, weights, xi):
    """One step of the sensitivity recursion.

    lam: (..., Q, 2Q, 2n) from the previous symbol (zeros at start);
    slopes: activation slopes at the current pre-activations;
    weights/xi: the current step's weight matrix and stacked input.
    """
    q = weights.shape[-1]
    if lam.shape[-2] != 2 * q or lam.shape[-1] != 2 * weights.shape[-2]:
        raise ValueError(
            f"sensitivity shape {lam.shape[-2:]} inconsistent with weights "
            f"{weights.shape[-2:]}"
        )
    rec = recurrent_real_block(weights, q)
    propagated = np.einsum("...ab,...jbc->...jac", rec, lam)
    return slopes[..., None, :, None] * (propagated + input_block(xi, q))


def output_sensitivity(lam):
    """Complex derivative of the read-out state per real coefficient.

    Collapses the Re/Im rows of the first state into one complex row per
    neuron: shape (..., Q, 2n).
    """
    q = lam.shape[-2] // 2
    return lam[..., 0, :] + 1j * lam[..., q, :]


def rnn_gradient(lam, e):
    """Per-neuron complex ascent directions G_j for the squared error.

    w_j += mu * G_j performs steepest descent on |e|^2; in the linear
    limit G_j reduces to xi * conj(e).
    """
    gamma = output_sensitivity(lam)
    gvec = (np.conj(e)[..., None, None] * gamma).real
    n = gvec.shape[-1] // 2
    return gvec[..., :n] + 1j * gvec[..., n:]


def sensitivity_norm_sq(lam):
    """Complex-equivalent squared norm per neuron: half the squared
    Frobenius norm of the real-composite block (equals ||xi||^2 on the
    first step, matching the linear-filter normalization)."""
    return 0.5 * np.sum(lam**2, axis=(-2, -1))


def wstar_view(lam):
    """Conjugate-coordinate view d x / d w*_j as a complex (..., Q, Q, n)
    block; on the first step from zero weights this is the one-hot
    structure with xi in neuron j's own row."""
    q = lam.shape[-2] // 2
    n = lam.shape[-1] // 2
    re_rows = lam[..., :q, :]
    im_rows = lam[..., q:, :]
    return 0.5 * (
        re_rows[..., :n]
        + im_rows[..., n:]
        + 1j * (im_rows[..., :n] - re_rows[..., n:])
    )


# ---------------------------------------------------------------------------
# weight updates
# ---------------------------------------------------------------------------

def nrtrl_update(weights, lam, e, mu, xi=None):
    """Normalized gradient step on every neuron, fired every symbol."""
    if mu <= 0:
        return weights
    g = rnn_gradient(lam, e)
    norm = step_denominator(lam, xi)
    step = mu * g / norm[..., None]
    return weights + np.swapaxes(step, -1, -2)


SATURATION_FLOOR = 0.25


def step_denominator(lam, xi=None):
    """Normalization for sensitivity-based steps.

    The raw per-neuron sensitivity energy shrinks quadratically with the
    activation slope while the gradient shrinks only linearly, so near
    saturation the quotient would blow the weights up. Flooring the
    denominator at a fraction of the input energy leaves the healthy
    regime untouched (there the sensitivity energy is at least the input
    energy) and makes saturated steps vanish with the slope instead.
    """
    norm = sensitivity_norm_sq(lam)
    if xi is None:
        return norm + EPS
    floor = SATURATION_FLOOR * np.sum(np.abs(xi) ** 2, axis=-1)
    return np.maximum(norm, floor[..., None]) + EPS


def sm_nrtrl_update(weights, lam, e, gamma, xi=None):
    """Data-selective step: update only where |e| > gamma, with the
    adaptive step (1 - gamma/|e|) / ||Lambda_j||^2.

    Returns (new_weights, fired) where fired broadcasts over the batch.
    """
    mag = np.abs(e)
    fired = mag > gamma
    safe = np.where(mag > 0, mag, 1.0)
    scale = np.where(fired, 1.0 - gamma / safe, 0.0)
    g = rnn_gradient(lam, e)
    norm = step_denominator(lam, xi)
    step = scale[..., None, None] * g / norm[..., None]
    return weights + np.swapaxes(step, -1, -2), fired


def feedback_regressor(decisions, zero_mask):
    """Decision vector with the structurally-zero entries removed."""
    if zero_mask is None:
        return np.broadcast_to(decisions, decisions.shape).copy()
    return np.where(zero_mask, 0.0, decisions)


def sm_feedback_update(feedback, decisions, e, gamma, zero_mask=None):
    """Set-membership feedback-filter step with structural projection.

    Uses the masked decision vector as the regressor and its exact
    squared norm as denominator, so recomputing the output with the new
    filter (holding everything else fixed) lands the error magnitude on
    gamma whenever an update fires.
    """
    reg = feedback_regressor(decisions, zero_mask)
    denom = np.sum(np.abs(reg) ** 2, axis=-1)
    mag = np.abs(e)
    fired = (mag > gamma) & (denom > 0)
    safe_mag = np.where(mag > 0, mag, 1.0)
    safe_den = np.where(denom > 0, denom, 1.0)
    c = np.where(fired, (1.0 - gamma / safe_mag) / safe_den, 0.0)
    new = feedback - c[..., None] * np.conj(e)[..., None] * reg
    if zero_mask is not None:
        new = np.where(zero_mask, 0.0, new)
    return new, fired


def nlms_update(weights, x, e, mu):
    """w <- w + mu * conj(e) * x / (||x||^2 + eps)."""
    norm = np.sum(np.abs(x) ** 2, axis=-1, keepdims=True) + EPS
    return weights + mu * np.conj(e)[..., None] * x / norm


def sm_nlms_update(weights, x, e, gamma):
    """Set-membership normalized step for a linear filter.

    The denominator is the exact input energy (zero-input steps are
    suppressed rather than regularized) so the a-posteriori error
    magnitude equals gamma to machine precision when an update fires.
    """
    norm = np.sum(np.abs(x) ** 2, axis=-1)
    mag = np.abs(e)
    fired = (mag > gamma) & (norm > 0)
    safe_mag = np.where(mag > 0, mag, 1.0)
    safe_norm = np.where(norm > 0, norm, 1.0)
    c = np.where(fired, (1.0 - gamma / safe_mag) / safe_norm, 0.0)
    return weights + c[..., None] * np.conj(e)[..., None] * x, fired


def error_bound(detector_kind, sigma2, config=None):
    """Bound gamma per detector family: sqrt(3.5 sigma^2) for the
    recurrent detectors, sqrt(5 sigma^2) for the linear ones."""
    neural = detector_kind in NEURAL_KINDS
    if config is not None:
        scale = config.gamma_scale_neural if neural else config.gamma_scale_linear
    else:
        scale = 3.5 if neural else 5.0
    return float(np.sqrt(scale * sigma2))


TRAINER_KINDS = ("nlms", "sm-nlms", "nrtrl", "sm-nrtrl")
SM_TRAINERS = ("sm-nlms", "sm-nrtrl")


@dataclass
class TrainerState:
    """Bookkeeping for one adaptive algorithm instance."""

    kind: str
    gamma: float = 0.0
    mu: float = 0.5
    update_count: int = 0
    symbol_count: int = 0

    def record(self, fired):
        fired = np.asarray(fired)
        self.update_count += int(np.sum(fired))
        self.symbol_count += int(fired.size)

    @property
    def update_rate(self):
        if self.symbol_count == 0:
            return 0.0
        return self.update_count / self.symbol_count

    @property
    def is_selective(self):
        return self.kind in SM_TRAINERS
