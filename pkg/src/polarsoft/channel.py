"""BPSK over AWGN: modulation, transmission and channel LLRs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    """AWGN channel with noise variance sigma^2 per real dimension."""

    noise_variance: float

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise ValueError("noise variance must be positive")

    @classmethod
    def from_ebn0(cls, ebn0_db: float, rate: float) -> "ChannelParams":
        """sigma^2 = 1 / (2 R 10^(EbN0/10)) for BPSK at information rate R."""
        return cls(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


@dataclass(frozen=True)
class LlrFrame:
    """Channel LLRs ln P(c=0|y)/P(c=1|y), one per code bit."""

    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("channel LLRs must be finite")


def modulate_bpsk(codeword: np.ndarray) -> np.ndarray:
    """Map bit 0 to +1.0 and bit 1 to -1.0."""
    return 1.0 - 2.0 * np.asarray(codeword, dtype=np.float64)


def awgn_transmit(symbols: np.ndarray, params: ChannelParams,
                  rng: np.random.Generator) -> np.ndarray:
    """y = x + n with n ~ N(0, sigma^2), drawn from the caller's stream."""
    sigma = np.sqrt(params.noise_variance)
    return symbols + rng.normal(0.0, sigma, size=np.shape(symbols))


def channel_llr(received: np.ndarray, params: ChannelParams) -> LlrFrame:
    """LLR of each received sample: 2 y / sigma^2."""
    return LlrFrame(2.0 * np.asarray(received, dtype=np.float64)
                    / params.noise_variance)


def channel_posterior(llr, bit: int):
    """P(c = bit | y) for a bit with channel LLR `llr`; sums to 1 over bits."""
    sign = 1.0 if bit == 0 else -1.0
    return 1.0 / (1.0 + np.exp(-sign * np.asarray(llr, dtype=np.float64)))


def log_channel_posterior(llr, bit: int):
    """log P(c = bit | y), numerically stable for large |llr|."""
    sign = 1.0 if bit == 0 else -1.0
    return -np.logaddexp(0.0, -sign * np.asarray(llr, dtype=np.float64))
