"""Receiver structures operating on the despread vector u(i).

Five detector kinds are supported:

=========  =====================================================
rake       picks the user's own matched-filter output u_k
lmud       adaptive linear combiner  z = w^H u
dfmud      linear combiner plus decision feedback  z = w^H u - f^H b
nmud       recurrent-network detector  z = D x(i)
dfnmud     recurrent-network detector plus decision feedback
=========  =====================================================

The recurrent detector stacks the previous state with u(i), applies a
complex weight matrix and a split hyperbolic-tangent activation (tanh on
the real and imaginary parts separately, keeping every state component
inside the unit box), and reads a single state out. Decisions from all
users - including the low-rate users' own linear receivers - are stacked
into the feedback vector; the feedback filter is constrained by a zero
pattern so a user never cancels its own symbol.

All operations broadcast over leading batch dimensions (Monte Carlo runs,
users) so the training loop stays vectorized.
"""

from dataclasses import dataclass, field

import numpy as np

DETECTOR_KINDS = ("rake", "lmud", "dfmud", "nmud", "dfnmud")
NEURAL_KINDS = ("nmud", "dfnmud")
FEEDBACK_KINDS = ("dfmud", "dfnmud")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def split_tanh(z):
    """tanh applied to real and imaginary parts independently."""
    z = np.asarray(z)
    return np.tanh(z.real) + 1j * np.tanh(z.imag)


def slice_qpsk(z):
    """Nearest constellation point by sign; sgn(0) counts as +1."""
    z = np.asarray(z)
    re = np.where(z.real >= 0, 1.0, -1.0)
    im = np.where(z.imag >= 0, 1.0, -1.0)
    return (re + 1j * im) * _INV_SQRT2


def stack_input(x_prev, u):
    """xi(i) = [x(i-1); u(i)] along the last axis.

    ``u`` may carry fewer batch dimensions than the state (one despread
    vector shared by several users); it is broadcast against the state's
    batch shape.
    """
    x_prev = np.asarray(x_prev)
    u = np.asarray(u)
    u_b = np.broadcast_to(u, x_prev.shape[:-1] + (u.shape[-1],))
    return np.concatenate([x_prev, u_b], axis=-1)


def rnn_preactivation(weights, xi):
    """W^H xi for column-stacked weights (..., Q+K_h, Q)."""
    if weights.shape[-2] != xi.shape[-1]:
        raise ValueError(
            f"weight rows {weights.shape[-2]} != input length {xi.shape[-1]}"
        )
    return np.einsum("...nq,...n->...q", weights.conj(), xi)


def rnn_forward(weights, x_prev, u):
    """One recurrent step; returns (x_new, xi, preactivation)."""
    xi = stack_input(x_prev, u)
    zeta = rnn_preactivation(weights, xi)
    return split_tanh(zeta), xi, zeta


def rnn_output(x):
    """D x with D = [1 0 ... 0]: the first state is the symbol estimate."""
    return x[..., 0]


def initial_decision(x):
    """Quantized network output used to fill the feedback vector."""
    return slice_qpsk(rnn_output(x))


def df_output(y, feedback, decisions):
    """z = y - f^H b for a soft estimate y and stacked decisions b."""
    if feedback.shape[-1] != decisions.shape[-1]:
        raise ValueError(
            f"feedback length {feedback.shape[-1]} != decisions {decisions.shape[-1]}"
        )
    return y - np.einsum("...k,...k->...", feedback.conj(), decisions)


def linear_output(w, u, feedback=None, decisions=None):
    """z = w^H u, optionally minus the feedback term."""
    if w.shape[-1] != u.shape[-1]:
        raise ValueError(f"weight length {w.shape[-1]} != input {u.shape[-1]}")
    y = np.einsum("...k,...k->...", w.conj(), u)
    if feedback is None:
        return y
    return df_output(y, feedback, decisions)


def assemble_decisions(hd_decisions, ld_decisions):
    """Stack per-user decisions into the K-vector fed back for cancellation."""
    hd = np.asarray(hd_decisions)
    ld = np.asarray(ld_decisions)
    if ld.size == 0:
        return hd
    return np.concatenate([hd, np.broadcast_to(ld, hd.shape[:-1] + ld.shape[-1:])], axis=-1)


def pdf_zero_pattern(n_users, n_hd_users):
    """Parallel-feedback mask: entry k of user k's filter is structurally zero.

    Returns a boolean (K_h, K) array, True where the coefficient is
    forced to zero. Only the high-rate users' own entries are masked;
    the low-rate section stays fully available for cancellation.
    """
    mask = np.zeros((n_hd_users, n_users), dtype=bool)
    mask[np.arange(n_hd_users), np.arange(n_hd_users)] = True
    return mask


def sdf_zero_pattern(n_users, n_hd_users):
    """Successive-feedback mask: user k may cancel only users with a
    larger index (strictly lower-triangular stacked filter matrix)."""
    rows = np.arange(n_hd_users)[:, None]
    cols = np.arange(n_users)[None, :]
    return cols <= rows


def apply_zero_pattern(feedback, mask):
    """Project the feedback filters onto their structural zero pattern."""
    return np.where(mask, 0.0, feedback)


@dataclass
class RnnDetectorState:
    """Weights, state, and feedback filter for one high-rate user."""

    weights: np.ndarray                 # (Q+K_h, Q) complex
    state: np.ndarray                   # (Q,) complex
    feedback: np.ndarray | None = None  # (K,) complex
    zero_pattern: np.ndarray | None = None

    @classmethod
    def zeros(cls, n_states, n_hd_users, n_users=None, zero_pattern=None):
        fb = None if n_users is None else np.zeros(n_users, dtype=complex)
        return cls(
            weights=np.zeros((n_states + n_hd_users, n_states), dtype=complex),
            state=np.zeros(n_states, dtype=complex),
            feedback=fb,
            zero_pattern=zero_pattern,
        )

    def step(self, u, decisions=None):
        """Advance the state and return the soft estimate z."""
        x, xi, zeta = rnn_forward(self.weights, self.state, u)
        self.state = x
        y = rnn_output(x)
        if self.feedback is None or decisions is None:
            return y, xi, zeta
        return df_output(y, self.feedback, decisions), xi, zeta


@dataclass
class LinearDetectorState:
    """Combiner (and optional feedback filter) acting on u(i)."""

    weights: np.ndarray
    feedback: np.ndarray | None = None
    zero_pattern: np.ndarray | None = None

    @classmethod
    def zeros(cls, n_hd_users, n_users=None, zero_pattern=None):
        fb = None if n_users is None else np.zeros(n_users, dtype=complex)
        return cls(np.zeros(n_hd_users, dtype=complex), fb, zero_pattern)

    @classmethod
    def rake(cls, n_hd_users, user):
        w = np.zeros(n_hd_users, dtype=complex)
        w[user] = 1.0
        return cls(w)

    def output(self, u, decisions=None):
        if self.feedback is None or decisions is None:
            return linear_output(self.weights, u)
        return linear_output(self.weights, u, self.feedback, decisions)
