"""Space-time matched-filter front end.

Each high-rate user owns an effective spatial signature: its spreading
code convolved with the multipath taps and phased across the array.
Stacking the signatures column-wise gives the bank S, and the detector
input is the despread vector u(i) = S^H r(i). Signatures are either
computed from the true channel (oracle mode) or tracked by a per-user
normalized LMS regression against known symbols.
"""

import numpy as np

from .airlink import steering_vector

NLMS_EPS = 1e-8


def effective_signature(code_chips, path_gains, path_delays, doas, n_antennas, window_chips):
    """Code convolved with the channel taps, steered per antenna.

    Returns the stacked (J*M,) vector; block p is the M-chip signature
    at antenna p. ``path_gains`` holds one complex gain per path
    (a single symbol interval's channel).
    """
    chips = np.asarray(code_chips, dtype=complex).reshape(-1)
    M = int(window_chips)
    delays = np.asarray(path_delays, dtype=np.int64)
    if np.any(delays >= M) or np.any(delays < 0):
        raise ValueError("path delays must lie in [0, M)")
    per_antenna = np.zeros((n_antennas, M), dtype=complex)
    for gain, tau, doa in zip(np.asarray(path_gains, dtype=complex), delays, doas):
        hi = min(int(tau) + chips.size, M)
        steer = steering_vector(n_antennas, doa)
        per_antenna[:, tau:hi] += gain * steer[:, None] * chips[None, : hi - tau]
    return per_antenna.reshape(-1)


def signature_bank(codes, channels, n_antennas, window_chips, symbol_index=0):
    """Oracle bank S (J*M x K_h) from the true channel at one symbol."""
    cols = [
        effective_signature(
            code.chips,
            user.path_gains[:, symbol_index],
            user.path_delays,
            user.doas,
            n_antennas,
            window_chips,
        )
        for code, user in zip(codes, channels.hd_users)
    ]
    return np.stack(cols, axis=1)


def despread(r, bank):
    """u(i) = S^H r(i): one matched-filter output per high-rate user.

    Accepts leading batch dimensions on both arguments.
    """
    r = np.asarray(r)
    bank = np.asarray(bank)
    if bank.shape[-2] != r.shape[-1]:
        raise ValueError(
            f"bank rows {bank.shape[-2]} != observation length {r.shape[-1]}"
        )
    return np.einsum("...mk,...m->...k", bank.conj(), r)


def nlms_signature_step(bank, r, symbols, step):
    """One normalized-LMS refinement of every column of the bank.

    Column k regresses r(i) against user k's symbol alone:
    s_k <- s_k + mu/(|b_k|^2 + eps) * (r - s_k b_k) * conj(b_k).
    Batched over leading dimensions. Other users' energy acts as
    regression noise here; prefer :func:`nlms_bank_step` when all
    users' symbols are available.
    """
    b = np.asarray(symbols)
    resid = r[..., :, None] - bank * b[..., None, :]
    return bank + step * resid * b[..., None, :].conj() / (
        np.abs(b[..., None, :]) ** 2 + NLMS_EPS
    )


def nlms_bank_step(bank, r, symbols, step):
    """Joint multichannel NLMS step on the whole bank.

    Models r(i) = S b(i) + v and regresses against the full symbol
    vector, so multi-access energy is explained by the other columns
    instead of polluting the residual:
    S <- S + mu * (r - S b) b^H / (||b||^2 + eps).
    """
    b = np.asarray(symbols)
    resid = r - np.einsum("...mk,...k->...m", bank, b)
    denom = np.sum(np.abs(b) ** 2, axis=-1)[..., None, None] + NLMS_EPS
    return bank + step * resid[..., :, None] * b[..., None, :].conj() / denom


def nlms_signature_estimate(observations, pilot_symbols, step=0.5, bank0=None):
    """Run the per-user signature regression over a pilot block.

    observations: (n, J*M); pilot_symbols: (n, K_h). Converges toward
    the amplitude-scaled true signatures when pilots are uncorrelated.
    """
    obs = np.asarray(observations, dtype=complex)
    pilots = np.asarray(pilot_symbols, dtype=complex)
    if obs.ndim != 2 or pilots.ndim != 2 or obs.shape[0] != pilots.shape[0]:
        raise ValueError("observations and pilots must have matching lengths")
    if pilots.shape[0] == 0:
        raise ValueError("need at least one pilot symbol")
    bank = (
        np.zeros((obs.shape[1], pilots.shape[1]), dtype=complex)
        if bank0 is None
        else np.array(bank0, dtype=complex)
    )
    for r, b in zip(obs, pilots):
        bank = nlms_signature_step(bank, r, b, step)
    return bank
