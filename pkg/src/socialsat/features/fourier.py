"""Radix-2 fast Fourier transform.

Inputs whose length is not a power of two are zero-padded at the end to the
next power of two, so coefficient k of a length-n input is
``sum_j x[j] * exp(-2i*pi*k*j/N)`` with ``N = next_pow2(n)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def next_pow2(n: int) -> int:
    if n < 1:
        raise ValueError("length must be positive")
    return 1 << (n - 1).bit_length()


@lru_cache(maxsize=32)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=int)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.flags.writeable = False
    return rev


@lru_cache(maxsize=64)
def _twiddles(m: int) -> np.ndarray:
    tw = np.exp(-2j * np.pi * np.arange(m // 2) / m)
    tw.flags.writeable = False
    return tw


def fft(x, n: int | None = None) -> np.ndarray:
    """FFT along the last axis, zero-padding to ``n`` (default: next power of two)."""
    x = np.asarray(x)
    if x.shape[-1] == 0:
        raise ValueError("fft of an empty series")
    size = next_pow2(x.shape[-1] if n is None else n)
    if n is not None and size != n:
        raise ValueError("explicit fft size must be a power of two")
    if x.shape[-1] > size:
        raise ValueError("fft size smaller than input")
    data = np.zeros(x.shape[:-1] + (size,), dtype=complex)
    data[..., : x.shape[-1]] = x
    data = data[..., _bit_reverse(size)]
    lead = data.shape[:-1]
    m = 2
    while m <= size:
        half = m // 2
        tw = _twiddles(m)
        blocks = data.reshape(lead + (size // m, m))
        a = blocks[..., :half]
        t = blocks[..., half:] * tw
        data = np.concatenate([a + t, a - t], axis=-1).reshape(lead + (size,))
        m *= 2
    return data


def ifft(X) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    size = X.shape[-1]
    if size != next_pow2(size):
        raise ValueError("ifft length must be a power of two")
    return np.conj(fft(np.conj(X))) / size


def autocorrelation(x) -> np.ndarray:
    """Normalised biased autocorrelation at lags 0..n-1 (lag 0 equals 1).

    Computed through a transform of length 2*next_pow2(n), so there is no
    circular wrap-around.  A constant input gives NaN.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    size = 2 * next_pow2(n)
    spec = fft(x - x.mean(), size)
    acov = ifft(spec * np.conj(spec)).real[:n]
    with np.errstate(invalid="ignore", divide="ignore"):
        return acov / acov[0]
