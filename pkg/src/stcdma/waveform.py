"""Spreading codes, QPSK mapping, and symbol-to-chip spreading.

Two user classes share the channel: high-rate users with a short code
(small processing gain, higher power) and low-rate users with a long
code. Codes are real bipolar sequences normalized to unit Euclidean
norm, repeated from symbol to symbol.
"""

from dataclasses import dataclass, field

import numpy as np

HD = "hd"
LD = "ld"

# Preferred pairs of primitive polynomials, given as feedback tap
# exponents (the x^n and 1 terms are implicit). Verified to yield the
# three-valued cross-correlation family {-1, -t, t-2}, t = 2^((n+1)/2)+1.
_PREFERRED_PAIRS = {
    3: ([1], [2]),          # x^3+x+1, x^3+x^2+1 -> length 7,  values {-5,-1,3}
    5: ([2], [4, 3, 2]),    # x^5+x^2+1, x^5+x^4+x^3+x^2+1 -> length 31, {-9,-1,7}
}

_INV_SQRT2 = 1.0 / np.sqrt(2.0)

# Gray map: (b0, b1) -> constellation point; b0 flips the imaginary
# sign, b1 the real sign.
_QPSK_POINTS = {
    (0, 0): (+1 + 1j) * _INV_SQRT2,
    (0, 1): (-1 + 1j) * _INV_SQRT2,
    (1, 1): (-1 - 1j) * _INV_SQRT2,
    (1, 0): (+1 - 1j) * _INV_SQRT2,
}


@dataclass(frozen=True)
class SpreadingCode:
    """Unit-norm bipolar spreading sequence for one user.

    chips are +-1/sqrt(N) so that ``chips @ chips == 1``.
    """

    chips: np.ndarray
    user_id: int = 0
    user_class: str = HD

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=float)
        object.__setattr__(self, "chips", chips)
        n = len(chips)
        if n == 0:
            raise ValueError("empty spreading code")
        if not np.allclose(np.abs(chips), 1.0 / np.sqrt(n), atol=1e-12):
            raise ValueError("chips must all have magnitude 1/sqrt(N)")

    @property
    def length(self):
        return len(self.chips)


def _msequence(taps, n):
    """Maximal-length sequence from an n-stage Fibonacci LFSR (all-ones seed)."""
    reg = np.ones(n, dtype=np.int64)
    period = (1 << n) - 1
    out = np.empty(period, dtype=np.int64)
    for i in range(period):
        out[i] = reg[-1]
        fb = reg[-1]
        for t in taps:
            fb ^= reg[t - 1]
        reg[1:] = reg[:-1]
        reg[0] = fb
    return out


def gold_family_size(register_length):
    return (1 << register_length) + 1


def generate_gold_set(register_length, count, seed=0, user_class=HD):
    """Generate ``count`` distinct Gold codes of length 2^n - 1.

    The family is built from a fixed preferred pair of m-sequences (u, v):
    the two sequences themselves plus u xor (every cyclic shift of v).
    ``seed`` shuffles which family members are handed out, so different
    Monte Carlo runs see different code subsets while remaining
    reproducible.
    """
    n = int(register_length)
    if n not in _PREFERRED_PAIRS:
        raise ValueError(
            f"unsupported register length {n}; supported: {sorted(_PREFERRED_PAIRS)}"
        )
    family = gold_family_size(n)
    if not 1 <= count <= family:
        raise ValueError(f"count {count} outside 1..{family} (Gold family size for n={n})")

    taps_u, taps_v = _PREFERRED_PAIRS[n]
    u = _msequence(taps_u, n)
    v = _msequence(taps_v, n)
    period = (1 << n) - 1

    members = [u, v]
    members.extend(np.bitwise_xor(u, np.roll(v, -k)) for k in range(period))

    order = np.random.default_rng(seed).permutation(family)[:count]
    scale = 1.0 / np.sqrt(period)
    return [
        SpreadingCode((1 - 2 * members[j]) * scale, user_id=i, user_class=user_class)
        for i, j in enumerate(order)
    ]


def generate_random_code(length, seed, user_id=0, user_class=HD):
    """Equiprobable +-1/sqrt(N) chips; deterministic for a given seed."""
    if length < 1:
        raise ValueError("code length must be >= 1")
    rng = np.random.default_rng(seed)
    signs = 1 - 2 * rng.integers(0, 2, size=length)
    return SpreadingCode(signs / np.sqrt(length), user_id=user_id, user_class=user_class)


def map_bits_to_qpsk(bit_pairs):
    """Map (b0, b1) pairs to unit-modulus QPSK symbols (Gray labelling)."""
    pairs = np.asarray(bit_pairs, dtype=np.int64)
    if pairs.size == 0:
        return np.zeros(0, dtype=complex)
    pairs = pairs.reshape(-1, 2)
    re = 1 - 2 * pairs[:, 1]
    im = 1 - 2 * pairs[:, 0]
    return (re + 1j * im) * _INV_SQRT2


def demap_qpsk_to_bits(symbols):
    """Inverse of :func:`map_bits_to_qpsk` by quadrant (ties go positive)."""
    s = np.asarray(symbols, dtype=complex)
    b1 = (s.real < 0).astype(np.int64)
    b0 = (s.imag < 0).astype(np.int64)
    return np.stack([b0, b1], axis=-1)


def random_symbols(count, rng):
    """Equiprobable QPSK symbols drawn from a Generator."""
    bits = rng.integers(0, 2, size=(count, 2))
    return map_bits_to_qpsk(bits)


def spread(symbols, code, amplitude=1.0):
    """Spread a symbol stream into per-symbol chip frames.

    Returns an (n_symbols, N) complex array; row i holds
    ``amplitude * symbols[i] * code.chips``. The code repeats every
    symbol, so total frame energy is amplitude**2 per symbol.
    """
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    syms = np.asarray(symbols, dtype=complex).reshape(-1)
    return amplitude * syms[:, None] * code.chips[None, :]


def codes_to_text(codes):
    """Serialize codes as one line of signed units per code, with an N header."""
    if not codes:
        raise ValueError("no codes to serialize")
    n = codes[0].length
    lines = [f"N {n}"]
    for c in codes:
        if c.length != n:
            raise ValueError("mixed code lengths in one file")
        signs = np.sign(c.chips).astype(int)
        lines.append(" ".join(f"{s:+d}" for s in signs))
    return "\n".join(lines) + "\n"


def codes_from_text(text, user_class=HD):
    """Parse the plain-text code format; normalization is applied on load."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("N "):
        raise ValueError("missing 'N <length>' header")
    n = int(lines[0].split()[1])
    codes = []
    for i, ln in enumerate(lines[1:]):
        signs = np.array([int(tok) for tok in ln.split()], dtype=float)
        if len(signs) != n or not np.all(np.abs(signs) == 1):
            raise ValueError(f"line {i + 1}: expected {n} entries of +-1")
        codes.append(SpreadingCode(signs / np.sqrt(n), user_id=i, user_class=user_class))
    return codes
