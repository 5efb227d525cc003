"""Baseband FIR channel: M-ary symbols, Toeplitz data matrix, AWGN, SINR estimate.

Symbol vectors carry an ``L``-symbol prefix: ``symbols[0]`` is ``s[-L]`` and
``symbols[L + t]`` is ``s[t]``.  The received sample is

    r[t] = sum_{i=0..L} h[i] s[t-i] + z[t],   t = 0..k
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class ChannelModel:
    taps: tuple
    noise_variance: float = 0.0
    alphabet_M: int = 2

    def __post_init__(self):
        taps = tuple(float(h) for h in self.taps)
        if not taps:
            raise ConfigurationError("channel needs at least one tap")
        if not self.noise_variance >= 0:
            raise ConfigurationError("noise_variance must be >= 0")
        _check_alphabet(self.alphabet_M)
        object.__setattr__(self, "taps", taps)

    @property
    def memory_L(self) -> int:
        return len(self.taps) - 1


@dataclass(frozen=True)
class ToeplitzFrame:
    matrix: np.ndarray   # (k+1, L+1); row t = [s[t-L], ..., s[t]]
    symbols: np.ndarray  # s[-L..k]
    received: np.ndarray = None


def _check_alphabet(M):
    if int(M) != M or M < 2 or M % 2:
        raise DomainError(f"amplitude alphabet needs an even M >= 2, got {M}")


def alphabet(M: int) -> np.ndarray:
    """Levels ``{±1, ±3, ..., ±(M-1)}`` scaled to unit average power."""
    _check_alphabet(M)
    levels = np.arange(-(M - 1), M, 2, dtype=float)
    return levels / math.sqrt((M * M - 1) / 3.0)


def gen_symbols(M: int, count: int, seed: int) -> np.ndarray:
    if count < 1:
        raise DomainError("count must be >= 1")
    levels = alphabet(M)
    rng = np.random.default_rng(seed)
    return levels[rng.integers(0, M, count)]


def build_toeplitz(symbols, L: int) -> ToeplitzFrame:
    """Data matrix whose row ``t`` is ``[s[t-L], ..., s[t]]``.

    Rows are in ascending time order (row 0 is time 0), i.e. the bottom-up
    reading of the stacked vector form.
    """
    s = np.asarray(symbols, dtype=float)
    if L < 0:
        raise DomainError("memory L must be >= 0")
    if s.ndim != 1 or s.size < L + 1:
        raise DomainError(f"need at least L+1={L + 1} symbols (L-symbol prefix plus one), got {s.size}")
    matrix = np.lib.stride_tricks.sliding_window_view(s, L + 1).copy()
    return ToeplitzFrame(matrix, s)


def toeplitz_product(frame: ToeplitzFrame, taps) -> np.ndarray:
    """``S_k @ [h[L], ..., h[0]]``, accumulated tap by tap from ``h[0]`` up.

    The fixed accumulation order makes the result identical, bit for bit, to
    a direct convolution sum taken in increasing tap order.
    """
    h = np.asarray(taps, dtype=float)
    L = frame.matrix.shape[1] - 1
    if h.size != L + 1:
        raise ConfigurationError(f"expected {L + 1} taps, got {h.size}")
    out = np.zeros(frame.matrix.shape[0])
    for i in range(L + 1):
        out += h[i] * frame.matrix[:, L - i]
    return out


def noiseless_output(model: ChannelModel, symbols) -> np.ndarray:
    return toeplitz_product(build_toeplitz(symbols, model.memory_L), model.taps)


def channel_output(model: ChannelModel, symbols, seed: int) -> np.ndarray:
    clean = noiseless_output(model, symbols)
    if model.noise_variance == 0:
        return clean
    rng = np.random.default_rng(seed)
    return clean + rng.normal(0.0, math.sqrt(model.noise_variance), clean.size)


def estimate_sinr(r, model: ChannelModel, symbols) -> float:
    """Data-aided SINR in dB from known symbols and taps.

    Returns ``math.inf`` when the residual is exactly zero.
    """
    r = np.asarray(r, dtype=float)
    if r.size < 100:
        raise DomainError(f"SINR estimate needs >= 100 samples, got {r.size}")
    clean = noiseless_output(model, symbols)
    if clean.size != r.size:
        raise ConfigurationError("received vector and symbol vector lengths disagree")
    resid = r - clean
    p_noise = float(np.mean(resid * resid))
    p_sig = float(np.mean(clean * clean))
    if p_noise == 0:
        return math.inf
    return 10.0 * math.log10(p_sig / p_noise)
