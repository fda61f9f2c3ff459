"""Vectorized Monte Carlo transmission and detection loop.

All independent runs of an experiment execute in lockstep: per-run data
(codes, symbols, channels, noise) is drawn up front from per-run seeds,
then one pass over the symbol timeline advances every run and every
high-rate user simultaneously. Batching changes nothing about any single
run's arithmetic - the causal loops stay causal - it only turns the
per-symbol work into small array operations.

The receiver is chip-synchronized to each detected user's main path, so
each high-rate user's one-shot observation window starts at its own
timing offset; interferers fall wherever their asynchronism puts them.
Every user therefore owns a window, a signature bank, and a despread
vector, all batched together.

The loop per high-rate symbol interval i:

1. despread each user's observation window with its signature bank,
2. advance each user's detector (recurrent state or linear combiner),
3. assemble the feedback vector from initial decisions (pilots during
   training) and the low-rate users' nearest-in-time decisions,
4. subtract the feedback term where the detector has one, slice,
5. compute the a-priori error against the pilot (training) or the final
   decision (decision-directed), update the trainer state, and
6. refresh the estimated signature banks by one normalized-LMS step.

Low-rate users run first as an independent pre-pass: their single-antenna
adaptive linear receivers never depend on high-rate decisions.
"""

from dataclasses import dataclass, field

import numpy as np

from . import adaptation as ad
from . import detector as det
from . import waveform as wf
from .airlink import awgn, compose_canvas
from .channel import load_profile, sample_channel
from .frontend import nlms_bank_step, despread
from .waveform import HD, LD


@dataclass(frozen=True)
class ReceiverSpec:
    """Detector/trainer pairing plus the tuning constants.

    Step sizes are the "optimized parameters" knobs; the set-membership
    algorithms take no step size (their step is fully determined by the
    error bound).
    """

    detector: str = "dfnmud"
    trainer: str | None = "sm-nrtrl"
    signature_mode: str = "estimated"   # "estimated" | "oracle"
    feedback_structure: str = "pdf"     # "pdf" | "sdf"
    linear_input: str = "obs"           # L-MUD/DF-MUD regressor: "obs" | "despread"
    mu_linear: float = 0.3
    mu_rnn: float = 0.1
    mu_feedback: float = 0.1
    mu_signature: float = 0.2
    mu_ld: float = 0.25

    def __post_init__(self):
        if self.detector not in det.DETECTOR_KINDS:
            raise ValueError(f"unknown detector {self.detector!r}")
        if self.trainer is not None and self.trainer not in ad.TRAINER_KINDS:
            raise ValueError(f"unknown trainer {self.trainer!r}")
        if self.detector != "rake" and self.trainer is None:
            raise ValueError("adaptive detectors need a trainer")
        neural = self.detector in det.NEURAL_KINDS
        if self.trainer is not None:
            wants_rnn = self.trainer in ("nrtrl", "sm-nrtrl")
            if wants_rnn != neural:
                raise ValueError(
                    f"trainer {self.trainer!r} does not fit detector {self.detector!r}"
                )

    @property
    def is_selective(self):
        return self.trainer in ad.SM_TRAINERS

    @property
    def has_feedback(self):
        return self.detector in det.FEEDBACK_KINDS


@dataclass
class MonteCarloResult:
    """Aggregated outcome of a batch of seeded runs."""

    config: object
    receiver: ReceiverSpec
    n_runs: int
    base_seed: int
    bit_errors_per_symbol: np.ndarray   # (data_symbols,) summed over runs+users
    bits_per_symbol: int
    fires_per_symbol: np.ndarray        # (total_symbols,) summed over runs+users
    gate_count_per_symbol: int
    gamma: float
    sigma2: float

    @property
    def ber(self):
        total_bits = self.bits_per_symbol * self.bit_errors_per_symbol.size
        return float(np.sum(self.bit_errors_per_symbol)) / total_bits

    @property
    def ber_trace(self):
        return self.bit_errors_per_symbol / self.bits_per_symbol

    @property
    def update_rate(self):
        return self.update_rate_over(0, self.fires_per_symbol.size)

    def update_rate_over(self, start, stop):
        """Update fraction restricted to a symbol-index range."""
        window = self.fires_per_symbol[start:stop]
        total = self.gate_count_per_symbol * window.size
        if total == 0:
            return 0.0
        return float(np.sum(window)) / total

    def windowed_trace(self, width=100):
        """Trailing moving average of the per-symbol error rate."""
        trace = self.ber_trace
        kernel = np.ones(width)
        sums = np.convolve(trace, kernel)[: trace.size]
        counts = np.minimum(np.arange(trace.size) + 1, width)
        return sums / counts


def _hd_codes(config, rng):
    if config.code_family == "gold":
        if config.hd_gain == 7:
            return wf.generate_gold_set(3, config.n_hd_users, seed=rng.integers(2**32))
        if config.hd_gain == 31:
            return wf.generate_gold_set(5, config.n_hd_users, seed=rng.integers(2**32))
        raise ValueError(
            f"no Gold family of length {config.hd_gain}; use code_family='random'"
        )
    return [
        wf.generate_random_code(config.hd_gain, rng.integers(2**32), user_id=k)
        for k in range(config.n_hd_users)
    ]


def _ld_codes(config, rng):
    if config.n_ld_users == 0:
        return []
    if config.ld_gain == 31:
        return wf.generate_gold_set(
            5, config.n_ld_users, seed=rng.integers(2**32), user_class=LD
        )
    return [
        wf.generate_random_code(config.ld_gain, rng.integers(2**32), user_id=q, user_class=LD)
        for q in range(config.n_ld_users)
    ]


@dataclass
class _RunData:
    """Everything one run needs, drawn up front from its own seed."""

    hd_windows: np.ndarray        # (K_h, n_hd, J*M), aligned per user
    hd_symbols: np.ndarray        # (K_h, n_hd)
    ld_windows: np.ndarray        # (K_l, n_ld, M_l)
    ld_symbols: np.ndarray        # (K_l, n_ld)
    ld_index_map: np.ndarray      # (K_l, n_hd) nearest LD symbol per HD symbol
    ld_matched: np.ndarray        # (K_l, M_l) zero-padded LD codes
    oracle_blocks: np.ndarray     # (K_h, L, J*M) steered shifted codes
    hd_path_gains: np.ndarray     # (K_h, L, n_hd)


def _prepare_run(config, run_seed, n_hd, n_hd_tx):
    N_h, N_l = config.hd_gain, config.ld_gain
    M = config.window_chips
    J = config.n_antennas
    L = config.n_paths
    seq = np.random.SeedSequence(run_seed)
    s_codes, s_sym, s_chan, s_noise = seq.spawn(4)
    rng_codes = np.random.default_rng(s_codes)
    rng_sym = np.random.default_rng(s_sym)
    rng_noise = np.random.default_rng(s_noise)

    total_chips = n_hd_tx * N_h + N_h + 3 * (L - 1) + M
    n_ld_tx = total_chips // N_l + 2

    hd_codes = _hd_codes(config, rng_codes)
    ld_codes = _ld_codes(config, rng_codes)
    hd_syms = wf.random_symbols(config.n_hd_users * n_hd_tx, rng_sym).reshape(
        config.n_hd_users, n_hd_tx
    )
    ld_syms = (
        wf.random_symbols(config.n_ld_users * n_ld_tx, rng_sym).reshape(
            config.n_ld_users, n_ld_tx
        )
        if config.n_ld_users
        else np.zeros((0, n_ld_tx), dtype=complex)
    )

    channels = sample_channel(
        config.profile,
        config.n_hd_users,
        config.n_ld_users,
        N_h,
        N_l,
        n_hd_tx,
        n_ld_tx,
        config.fdT,
        s_chan,
        synchronous=config.synchronous,
        hd_synchronous=not config.hd_asynchronous,
    )

    hd_frames = [
        wf.spread(hd_syms[k], hd_codes[k], config.hd_amplitude)
        for k in range(config.n_hd_users)
    ]
    ld_frames = [
        wf.spread(ld_syms[q], ld_codes[q], config.ld_amplitude)
        for q in range(config.n_ld_users)
    ]
    canvas = compose_canvas(hd_frames, ld_frames, channels, config, total_chips)
    canvas += awgn(config.sigma2, canvas.shape, rng_noise)

    # per-user observation windows: user k's symbol-i window starts at
    # its own asynchronism offset, so its own main path sits at chip 0
    sliding = np.lib.stride_tricks.sliding_window_view(canvas, M, axis=1)
    hd_windows = np.zeros((config.n_hd_users, n_hd, J * M), dtype=complex)
    for k, user in enumerate(channels.hd_users):
        starts = user.asynchronism + np.arange(n_hd) * N_h
        hd_windows[k] = sliding[:, starts, :].transpose(1, 0, 2).reshape(n_hd, J * M)

    # low-rate windows on the first antenna, aligned per user
    M_l = N_l + L - 1
    n_ld = (total_chips - M_l - N_l) // N_l
    ld_windows = np.zeros((config.n_ld_users, n_ld, M_l), dtype=complex)
    ld_index = np.zeros((config.n_ld_users, n_hd), dtype=np.int64)
    ld_matched = np.zeros((config.n_ld_users, M_l), dtype=complex)
    row = canvas[0]
    for q, user in enumerate(channels.ld_users):
        d = user.asynchronism
        sl = np.lib.stride_tricks.sliding_window_view(row, M_l)
        starts = d + np.arange(n_ld) * N_l
        ld_windows[q] = sl[starts]
        centers = (np.arange(n_hd) + 0.5) * N_h
        ld_index[q] = np.clip(
            np.round((centers - d) / N_l - 0.5).astype(np.int64), 0, n_ld - 1
        )
        ld_matched[q, :N_l] = ld_codes[q].chips

    # steered, delay-shifted code blocks for oracle signatures (the user's
    # own asynchronism is absorbed by its window alignment):
    # signature(i) = sum_m gains[k, m, i] * blocks[k, m]
    blocks = np.zeros((config.n_hd_users, L, J, M), dtype=complex)
    gains = np.zeros((config.n_hd_users, L, n_hd), dtype=complex)
    for k, user in enumerate(channels.hd_users):
        for m in range(L):
            delay = int(user.path_delays[m])
            if delay >= M:
                continue
            chips = hd_codes[k].chips
            hi = min(delay + chips.size, M)
            steer = np.exp(-1j * np.pi * np.arange(J) * np.sin(user.doas[m]))
            blocks[k, m, :, delay:hi] = steer[:, None] * chips[None, : hi - delay]
        gains[k] = user.path_gains[:, :n_hd]

    return _RunData(
        hd_windows=hd_windows,
        hd_symbols=hd_syms[:, :n_hd],
        ld_windows=ld_windows,
        ld_symbols=ld_syms[:, :n_ld] if config.n_ld_users else ld_syms,
        ld_index_map=ld_index,
        ld_matched=ld_matched,
        oracle_blocks=blocks.reshape(config.n_hd_users, L, J * M),
        hd_path_gains=gains,
    )


def _ld_receiver_pass(config, spec, ld_windows, ld_symbols, n_ld_train, w0=None):
    """Adaptive linear receivers for the low-rate users (batched).

    Starts from the matched filter (the user's own code) when ``w0`` is
    given, then refines by normalized LMS: pilot-aided inside the
    high-rate training span, decision-directed afterwards. Returns the
    per-symbol decisions, shape (runs, K_l, n_ld).
    """
    runs, K_l, n_ld, M_l = ld_windows.shape
    if K_l == 0:
        return np.zeros((runs, 0, n_ld), dtype=complex)
    w = np.zeros((runs, K_l, M_l), dtype=complex) if w0 is None else w0.astype(complex)
    decisions = np.zeros((runs, K_l, n_ld), dtype=complex)
    for i in range(n_ld):
        x = ld_windows[:, :, i, :]
        y = np.einsum("rqm,rqm->rq", w.conj(), x)
        decided = det.slice_qpsk(y)
        decisions[:, :, i] = decided
        target = ld_symbols[:, :, i] if i < n_ld_train else decided
        e = target - y
        w = ad.nlms_update(w, x, e, spec.mu_ld)
    return decisions


def _bit_errors(decided, truth):
    """Gray-mapped bit errors between two constellation-valued arrays."""
    re = (decided.real >= 0) != (truth.real >= 0)
    im = (decided.imag >= 0) != (truth.imag >= 0)
    return re.astype(np.int64) + im.astype(np.int64)


def run_monte_carlo(config, receiver, n_runs, base_seed):
    """Execute ``n_runs`` seeded runs of one receiver configuration.

    Per-run randomness is derived from (base_seed, run_index), so results
    are independent of batching and reproducible byte-for-byte.
    """
    spec = receiver
    K_h, K_l = config.n_hd_users, config.n_ld_users
    K = config.n_users
    Q = config.n_states
    n_in = Q + K_h
    JM = config.obs_dim
    n_train = config.training_symbols
    n_data = config.data_symbols
    n_hd = n_train + n_data
    n_hd_tx = n_hd + 2

    runs = [
        _prepare_run(config, [int(base_seed), r], n_hd, n_hd_tx)
        for r in range(n_runs)
    ]
    R = np.stack([rd.hd_windows for rd in runs])            # (runs, K_h, n_hd, JM)
    truth = np.stack([rd.hd_symbols for rd in runs])        # (runs, K_h, n_hd)
    blocks = np.stack([rd.oracle_blocks for rd in runs])    # (runs, K_h, L, JM)
    path_gains = np.stack([rd.hd_path_gains for rd in runs])

    n_ld = runs[0].ld_windows.shape[1] if K_l else 0
    n_ld_train = (n_train * config.hd_gain) // config.ld_gain if K_l else 0
    ld_windows = np.stack([rd.ld_windows for rd in runs]) if K_l else np.zeros(
        (n_runs, 0, 0, 0), dtype=complex
    )
    ld_symbols = np.stack([rd.ld_symbols for rd in runs]) if K_l else np.zeros(
        (n_runs, 0, 0), dtype=complex
    )
    ld_index = np.stack([rd.ld_index_map for rd in runs]) if K_l else np.zeros(
        (n_runs, 0, n_hd), dtype=np.int64
    )

    ld_decisions = _ld_receiver_pass(config, spec, ld_windows, ld_symbols, n_ld_train)

    gamma = ad.error_bound(spec.detector, config.sigma2, config)
    neural = spec.detector in det.NEURAL_KINDS
    adaptive_w = spec.detector in ("lmud", "dfmud")
    # adaptive linear receivers act either on the raw space-time
    # observation (full interference-suppression capability, the
    # classical structure) or on the despread bank outputs
    full_obs = adaptive_w and spec.linear_input == "obs"
    lin_dim = JM if full_obs else K_h

    # detector state, batched over (runs, users)
    W = np.zeros((n_runs, K_h, n_in, Q), dtype=complex)
    x_state = np.zeros((n_runs, K_h, Q), dtype=complex)
    w_lin = np.zeros((n_runs, K_h, lin_dim), dtype=complex)
    if spec.detector == "rake":
        w_lin[:, np.arange(K_h), np.arange(K_h)] = 1.0
    lam = ad.zero_sensitivity((n_runs, K_h), Q, K_h)
    if spec.has_feedback:
        fb = np.zeros((n_runs, K_h, K), dtype=complex)
        if spec.feedback_structure == "pdf":
            mask = det.pdf_zero_pattern(K, K_h)
        else:
            mask = det.sdf_zero_pattern(K, K_h)
        mask = np.broadcast_to(mask, (n_runs, K_h, K))
    else:
        fb, mask = None, None

    # one signature bank per detected user's window: (runs, K_h, JM, K_h)
    bank = np.zeros((n_runs, K_h, JM, K_h), dtype=complex)

    bit_errors = np.zeros(n_data, dtype=np.int64)
    fires = np.zeros(n_hd, dtype=np.int64)

    needs_bank = neural or spec.detector == "rake" or not full_obs

    for i in range(n_hd):
        r_i = R[:, :, i, :]                              # (runs, K_h, JM)
        if needs_bank:
            if spec.signature_mode == "oracle":
                sig = np.einsum("rklj,rkl->rjk", blocks, path_gains[:, :, :, i])
                bank = np.broadcast_to(sig[:, None, :, :], bank.shape)
            u = despread(r_i, bank)                      # (runs, K_h, K_h)
        training = i < n_train
        pilots = truth[:, :, i]

        if neural:
            x_new, xi, zeta = det.rnn_forward(W, x_state, u)
            y = det.rnn_output(x_new)
        else:
            lin_in = r_i if full_obs else u
            y = np.einsum("rku,rku->rk", w_lin.conj(), lin_in)

        if spec.has_feedback:
            # high-rate entries: pilots while training, detected symbols
            # after; low-rate entries: always the low-rate receivers'
            # own decisions, so the feedback filter adapts to the actual
            # (imperfect) regressor statistics it will see in operation
            hd_fb = pilots if training else det.slice_qpsk(y)
            if K_l:
                idx = ld_index[:, :, i]
                ld_fb = np.take_along_axis(ld_decisions, idx[:, :, None], axis=2)[:, :, 0]
            else:
                ld_fb = np.zeros((n_runs, 0), dtype=complex)
            bhat = det.assemble_decisions(hd_fb, ld_fb)  # (runs, K)
            bhat_users = np.broadcast_to(bhat[:, None, :], (n_runs, K_h, K))
            z = y - np.einsum("rkc,rkc->rk", fb.conj(), bhat_users)
        else:
            z = y

        decided = det.slice_qpsk(z)
        if not training:
            bit_errors[i - n_train] = int(np.sum(_bit_errors(decided, pilots)))

        target = pilots if training else decided
        e = target - z

        # The recurrent detectors take the two set-membership steps as
        # written (weights, then feedback filter); the activation's
        # linearization shrink keeps the pair from overshooting. The
        # all-linear DF detector would overshoot with two exact steps,
        # so it takes one jointly normalized step over [w; f] instead.
        if neural:
            lam = ad.sensitivity_update(lam, ad.activation_slopes(zeta), W, xi)
            if spec.trainer == "nrtrl":
                W = ad.nrtrl_update(W, lam, e, spec.mu_rnn, xi=xi)
            else:
                W, fired = ad.sm_nrtrl_update(W, lam, e, gamma, xi=xi)
                fires[i] = int(np.sum(fired))
                if spec.has_feedback:
                    fb, _ = ad.sm_feedback_update(fb, bhat_users, e, gamma, mask)
            x_state = x_new
        elif adaptive_w:
            if spec.trainer == "nlms":
                w_lin = ad.nlms_update(w_lin, lin_in, e, spec.mu_linear)
            elif not spec.has_feedback:
                w_lin, fired = ad.sm_nlms_update(w_lin, lin_in, e, gamma)
                fires[i] = int(np.sum(fired))
            else:
                reg = ad.feedback_regressor(bhat_users, mask)
                stacked_w = np.concatenate([w_lin, fb], axis=-1)
                stacked_x = np.concatenate(
                    [lin_in, -np.broadcast_to(reg, fb.shape)], axis=-1
                )
                stacked_w, fired = ad.sm_nlms_update(stacked_w, stacked_x, e, gamma)
                fires[i] = int(np.sum(fired))
                w_lin = stacked_w[..., :lin_dim]
                fb = np.where(mask, 0.0, stacked_w[..., lin_dim:])

        if spec.has_feedback and spec.trainer in ("nlms", "nrtrl"):
            reg = ad.feedback_regressor(bhat_users, mask)
            denom = np.sum(np.abs(reg) ** 2, axis=-1, keepdims=True) + ad.EPS
            fb = fb - spec.mu_feedback * np.conj(e)[..., None] * reg / denom
            fb = np.where(mask, 0.0, fb)

        # Signatures are estimated from the pilots only; afterwards the
        # bank is frozen and the detectors' own adaptation carries the
        # (slow) channel tracking. Decision-driven signature updates at
        # the error rates of this scenario destabilize the whole chain.
        if needs_bank and spec.signature_mode == "estimated" and training:
            bank = nlms_bank_step(bank, r_i, pilots[:, None, :], spec.mu_signature)

    return MonteCarloResult(
        config=config,
        receiver=spec,
        n_runs=n_runs,
        base_seed=base_seed,
        bit_errors_per_symbol=bit_errors,
        bits_per_symbol=2 * K_h * n_runs,
        fires_per_symbol=fires,
        gate_count_per_symbol=K_h * n_runs,
        gamma=gamma,
        sigma2=config.sigma2,
    )
