"""Helpers for complex trigonometric polynomials on the unit torus.

A function f with period one is stored as a coefficient vector c of length
2K+1, frequency index k = -K..K, meaning f(t) = sum_k c[K+k] exp(2 pi i k t).
All routines below are exact operations on such polynomials (up to roundoff),
which is what makes the integral identities in the rest of the package hold
to machine precision.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def order(coeffs: np.ndarray) -> int:
    """Truncation order K of a coefficient vector of length 2K+1."""
    n = coeffs.shape[-1]
    if n % 2 != 1:
        raise ValueError("coefficient vector must have odd length 2K+1")
    return (n - 1) // 2


def frequencies(K: int) -> np.ndarray:
    """Integer frequency index array (-K..K)."""
    return np.arange(-K, K + 1)


def evaluate(coeffs: np.ndarray, t) -> np.ndarray:
    """Evaluate the polynomial(s) at scalar or array t.

    coeffs may have leading axes (e.g. shape (4, 2K+1)); the result has shape
    coeffs.shape[:-1] + t.shape.
    """
    t = np.asarray(t, dtype=float)
    K = order(coeffs)
    phase = np.exp(2j * np.pi * np.multiply.outer(frequencies(K), t))
    return np.tensordot(coeffs, phase, axes=(-1, 0))


def pad_to(coeffs: np.ndarray, K_new: int) -> np.ndarray:
    """Zero-pad (or validate) a coefficient vector to order K_new."""
    K = order(coeffs)
    if K_new < K:
        raise ValueError("cannot pad to a smaller order")
    pad = K_new - K
    width = [(0, 0)] * (coeffs.ndim - 1) + [(pad, pad)]
    return np.pad(coeffs, width)


def truncate_to(coeffs: np.ndarray, K_new: int) -> np.ndarray:
    """Drop frequencies above K_new (Galerkin projection)."""
    K = order(coeffs)
    if K_new >= K:
        return pad_to(coeffs, K_new)
    cut = K - K_new
    return coeffs[..., cut:-cut]


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact product of two polynomials; the order grows to Ka + Kb."""
    return np.convolve(a, b)


def conjugate(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of conj(f): conjugate and reverse the frequency axis."""
    return np.conj(coeffs[..., ::-1])


def differentiate(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of f'."""
    K = order(coeffs)
    return coeffs * (2j * np.pi * frequencies(K))


def mean(coeffs: np.ndarray):
    """Mean value over one period (the zero-frequency coefficient)."""
    K = order(coeffs)
    return coeffs[..., K]


def integrate_period(coeffs: np.ndarray):
    """Integral over one full period."""
    return mean(coeffs)


def antiderivative_from_zero(coeffs: np.ndarray, t) -> np.ndarray:
    """Evaluate F(t) = int_0^t f, exactly.

    F(t) = c_0 t + sum_{k != 0} c_k (e^{2 pi i k t} - 1) / (2 pi i k).
    """
    t = np.asarray(t, dtype=float)
    K = order(coeffs)
    k = frequencies(K)
    out = np.multiply.outer(mean(coeffs), t)
    nz = k != 0
    kern = (np.exp(2j * np.pi * np.multiply.outer(k[nz], t)) - 1.0) / (
        2j * np.pi * k[nz]
    )[(...,) + (None,) * np.ndim(t)]
    out = out + np.tensordot(coeffs[..., nz], kern, axes=(-1, 0))
    return out


def zero_mean_antiderivative(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of the zero-mean antiderivative of a zero-mean polynomial.

    Mode k != 0 is divided by 2 pi i k; the zero mode of the result is zero.
    The caller is responsible for checking that mean(coeffs) vanishes.
    """
    K = order(coeffs)
    k = frequencies(K)
    out = np.zeros_like(coeffs)
    nz = k != 0
    out[..., nz] = coeffs[..., nz] / (2j * np.pi * k[nz])
    return out


def shift(coeffs: np.ndarray, s: float) -> np.ndarray:
    """Coefficients of t -> f(t + s)."""
    K = order(coeffs)
    return coeffs * np.exp(2j * np.pi * frequencies(K) * s)


def sobolev_norm_sq(coeffs: np.ndarray) -> float:
    """Squared H^1 norm: sum_k (1 + (2 pi k)^2) |c_k|^2, summed over all axes."""
    K = order(coeffs)
    w = 1.0 + (TWO_PI * frequencies(K)) ** 2
    return float(np.sum(w * np.abs(coeffs) ** 2))
