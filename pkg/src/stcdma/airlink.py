"""Discrete-time uplink model: composes the J*M observation vector seen
by the antenna array from every user's chip stream, multipath channel,
array steering phases, asynchronism, and noise.

The observation window for symbol i spans the M = N_h + L - 1 chips
starting at chip i*N_h. Adjacent-symbol leakage (ISI) and the
asynchronous overlap of the low-rate users arise naturally from
chip-level placement; no interference term is ever built explicitly.
"""

from dataclasses import dataclass, replace

import numpy as np

from .channel import load_profile


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters shared by all modules."""

    n_hd_users: int = 3
    n_ld_users: int = 3
    hd_gain: int = 7            # chips per HD symbol
    ld_gain: int = 31           # chips per LD symbol
    n_antennas: int = 1
    profile: object = "three-path-0-3-6"
    ebno_db: float = 10.0
    sigma2_override: float | None = None
    fdT: float = 1e-4
    hd_amplitude: float = 1.0
    ld_power_offset_db: float = -3.0
    n_states: int = 1           # recurrent detector state count
    gamma_scale_neural: float = 3.5
    gamma_scale_linear: float = 5.0
    training_symbols: int = 200
    data_symbols: int = 2000
    code_family: str = "gold"   # "gold" or "random" for the HD codes
    # High-rate users transmit symbol-aligned (chip-level multipath
    # asynchrony still applies through the random path delays); the
    # low-rate users are fully asynchronous. Flip hd_asynchronous for
    # per-user random symbol offsets on the high-rate side as well.
    hd_asynchronous: bool = False
    synchronous: bool = False   # force zero asynchronism for everyone

    def __post_init__(self):
        if self.n_hd_users < 1:
            raise ValueError("need at least one high-rate user")
        if self.n_antennas < 1 or self.hd_gain < 1 or self.ld_gain < 1:
            raise ValueError("gains and antenna count must be positive")

    @property
    def n_users(self):
        return self.n_hd_users + self.n_ld_users

    @property
    def n_paths(self):
        return load_profile(self.profile).num_paths

    @property
    def window_chips(self):
        """M = N_h + L - 1, the per-antenna observation length."""
        return self.hd_gain + self.n_paths - 1

    @property
    def obs_dim(self):
        return self.n_antennas * self.window_chips

    @property
    def ld_amplitude(self):
        return self.hd_amplitude * 10.0 ** (self.ld_power_offset_db / 20.0)

    @property
    def sigma2(self):
        """Per-entry complex noise variance.

        Convention: the HD symbol energy A^2 carries two bits, so
        Eb = A^2/2 and sigma2 = A^2 / (2 * Eb/N0). The reference is the
        single-antenna matched-filter bound; extra antennas improve the
        operating point rather than redefining it.
        """
        if self.sigma2_override is not None:
            return self.sigma2_override
        ebno = 10.0 ** (self.ebno_db / 10.0)
        return self.hd_amplitude**2 / (2.0 * ebno)

    def with_(self, **kw):
        return replace(self, **kw)


def steering_phase(antenna, doa):
    """Phase lag at an antenna (1-based) for a plane wave from ``doa``.

    Half-wavelength element spacing: 2*pi*(p-1)*(1/2)*sin(doa). The
    first element is the phase reference.
    """
    if np.any(np.asarray(antenna) < 1):
        raise ValueError("antenna index is 1-based")
    return np.pi * (np.asarray(antenna) - 1) * np.sin(doa)


def steering_vector(n_antennas, doa):
    """exp(-j*Theta_p) for p = 1..J, as applied to arriving paths."""
    return np.exp(-1j * steering_phase(np.arange(1, n_antennas + 1), doa))


def awgn(sigma2, shape, rng):
    """Circular complex Gaussian noise, per-entry variance sigma2."""
    if sigma2 < 0:
        raise ValueError("noise variance must be nonnegative")
    if sigma2 == 0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(sigma2 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def compose_canvas(hd_frames, ld_frames, channels, config, total_chips, rng=None):
    """Received chip matrix (J, total_chips) for a whole run.

    hd_frames / ld_frames: per-user (n_symbols, N) chip-frame arrays with
    amplitudes already applied. Noise is added when ``rng`` is given.
    """
    J = config.n_antennas
    canvas = np.zeros((J, total_chips), dtype=complex)
    for frames, user in zip(hd_frames, channels.hd_users):
        _accumulate(canvas, frames, user, J, total_chips)
    for frames, user in zip(ld_frames, channels.ld_users):
        _accumulate(canvas, frames, user, J, total_chips)
    if rng is not None:
        canvas += awgn(config.sigma2, canvas.shape, rng)
    return canvas


def _accumulate(canvas, frames, user, n_antennas, T):
    n_sym = frames.shape[0]
    for m, tau in enumerate(user.path_delays):
        base = int(user.asynchronism) + int(tau)
        if base >= T:
            continue
        gains = user.path_gains[m, :n_sym]
        steer = steering_vector(n_antennas, user.doas[m])
        stream = (frames * gains[:, None]).reshape(-1)
        hi = min(base + stream.size, T)
        canvas[:, base:hi] += steer[:, None] * stream[: hi - base][None, :]


def compose_observation(i, hd_frames, ld_frames, channels, config, rng=None):
    """Observation vector r(i) of length J*M for HD symbol interval i.

    Sums, chip by chip, every (user, path, symbol) frame that overlaps
    the window [i*N_h, i*N_h + M); raises if a required frame is missing
    from the supplied chip history.
    """
    N_h = config.hd_gain
    M = config.window_chips
    J = config.n_antennas
    w0 = i * N_h
    window = np.zeros((J, M), dtype=complex)

    def add_user(frames, user, gain):
        n_sym = frames.shape[0]
        for m, tau in enumerate(user.path_delays):
            base = int(user.asynchronism) + int(tau)
            lo_sym = int(np.floor((w0 - base - gain + 1) / gain))
            hi_sym = int(np.floor((w0 + M - 1 - base) / gain))
            if hi_sym >= n_sym:
                raise ValueError(
                    f"chip history too short: need symbol {hi_sym}, have {n_sym}"
                )
            steer = steering_vector(J, user.doas[m])
            for s in range(max(lo_sym, 0), hi_sym + 1):
                start = base + s * gain - w0
                a0, a1 = max(0, -start), min(gain, M - start)
                if a0 >= a1:
                    continue
                chunk = user.path_gains[m, s] * frames[s, a0:a1]
                window[:, start + a0 : start + a1] += steer[:, None] * chunk[None, :]

    for frames, user in zip(hd_frames, channels.hd_users):
        add_user(frames, user, config.hd_gain)
    for frames, user in zip(ld_frames, channels.ld_users):
        add_user(frames, user, config.ld_gain)

    r = window.reshape(-1)
    if rng is not None:
        r = r + awgn(config.sigma2, r.shape, rng)
    return r
