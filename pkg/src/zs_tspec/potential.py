"""Four-component period-1 potentials and their symmetry classification.

A potential is the 4-tuple psi = (psi1, psi2, psi3, psi4) of complex period-1
functions entering the 2x2 linear system

    M_t = (R(lam) + V(t, lam)) M,
    V   = [[-i psi1 psi2,        2 lam psi1 + i psi3],
           [ 2 lam psi2 - i psi4, i psi1 psi2       ]].

Each component is stored as a truncated Fourier series (see fourier.py), so
periodicity is exact and the H^1 norm is available in closed form.  The
conjugation psi* = (conj psi2, conj psi1, conj psi4, conj psi3) singles out
the real-type (psi* = psi) and imaginary-type (psi* = -psi) subspaces, which
correspond to the defocusing and focusing reductions psi = (u, s ubar, u_x,
s ubar_x) with s = +1 / -1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import fourier

DEFAULT_K = 16
CLASSIFY_TOL = 1e-12


class SymmetryClass(Enum):
    REAL_TYPE = "RealType"
    IMAGINARY_TYPE = "ImaginaryType"
    GENERAL = "General"


@dataclass(frozen=True)
class Potential:
    """Truncated-Fourier representation of the four potential components.

    coeffs[j, K+k] is the coefficient of exp(2 pi i k t) in psi^{j+1},
    j = 0..3, k = -K..K.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != 4 or c.shape[1] % 2 != 1:
            raise ValueError("coeffs must have shape (4, 2K+1)")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def K(self) -> int:
        return fourier.order(self.coeffs)

    def evaluate(self, t):
        """Component values (psi1..psi4) at scalar or array times t."""
        return fourier.evaluate(self.coeffs, t)

    def __call__(self, t):
        return self.evaluate(t)

    def norm(self) -> float:
        """H^1-type norm: sqrt of the sum of the four component H^1 norms."""
        return float(np.sqrt(fourier.sobolev_norm_sq(self.coeffs)))

    def shift(self, s: float) -> "Potential":
        """The translated potential t -> psi(t + s)."""
        return Potential(fourier.shift(self.coeffs, s))

    def scaled(self, factor: complex) -> "Potential":
        return Potential(self.coeffs * factor)

    def __add__(self, other: "Potential") -> "Potential":
        K = max(self.K, other.K)
        return Potential(
            fourier.pad_to(self.coeffs, K) + fourier.pad_to(other.coeffs, K)
        )

    def __sub__(self, other: "Potential") -> "Potential":
        K = max(self.K, other.K)
        return Potential(
            fourier.pad_to(self.coeffs, K) - fourier.pad_to(other.coeffs, K)
        )


def zero_potential(K: int = 0) -> Potential:
    return Potential(np.zeros((4, 2 * K + 1), dtype=complex))


def from_components(c1, c2, c3, c4) -> Potential:
    """Build a potential from four coefficient vectors (padded to common K)."""
    rows = [np.atleast_1d(np.asarray(c, dtype=complex)) for c in (c1, c2, c3, c4)]
    K = max(fourier.order(r) for r in rows)
    return Potential(np.stack([fourier.pad_to(r, K) for r in rows]))


def constant_potential(values) -> Potential:
    """Potential whose four components are the given constants."""
    vals = np.asarray(values, dtype=complex)
    return Potential(vals.reshape(4, 1))


def single_mode(j: int, k: int, amplitude: complex, K: int | None = None) -> Potential:
    """Potential with a single Fourier mode: psi^j = amplitude * e^{2 pi i k t}."""
    if K is None:
        K = max(abs(k), 1)
    c = np.zeros((4, 2 * K + 1), dtype=complex)
    c[j - 1, K + k] = amplitude
    return Potential(c)


def star_conjugate(psi: Potential) -> Potential:
    """The involution psi* = (conj psi2, conj psi1, conj psi4, conj psi3)."""
    c = fourier.conjugate(psi.coeffs)
    return Potential(c[[1, 0, 3, 2]])


def classify(psi: Potential, tol: float = CLASSIFY_TOL) -> SymmetryClass:
    """Symmetry class by coefficientwise max-norm comparison of psi* with psi.

    The zero potential satisfies both psi* = psi and psi* = -psi; it is
    reported as real type (the real-type test runs first).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    star = star_conjugate(psi).coeffs
    if np.max(np.abs(star - psi.coeffs)) <= tol:
        return SymmetryClass.REAL_TYPE
    if np.max(np.abs(star + psi.coeffs)) <= tol:
        return SymmetryClass.IMAGINARY_TYPE
    return SymmetryClass.GENERAL


@dataclass(frozen=True)
class AknsCoordinates:
    """Coordinates (q0, p0, q1, p1) of the conjugated real-form system.

    q0 = (psi1 + psi2)/2,  p0 = -(i/2)(psi1 - psi2),
    q1 = (psi3 + psi4)/2,  p1 = -(i/2)(psi3 - psi4).

    A potential is of real type iff all four functions are real valued.
    """

    coeffs: np.ndarray  # shape (4, 2K+1): rows q0, p0, q1, p1

    @property
    def K(self) -> int:
        return fourier.order(self.coeffs)

    def evaluate(self, t):
        return fourier.evaluate(self.coeffs, t)


def to_akns(psi: Potential) -> AknsCoordinates:
    c = psi.coeffs
    q0 = 0.5 * (c[0] + c[1])
    p0 = -0.5j * (c[0] - c[1])
    q1 = 0.5 * (c[2] + c[3])
    p1 = -0.5j * (c[2] - c[3])
    return AknsCoordinates(np.stack([q0, p0, q1, p1]))


def from_akns(akns: AknsCoordinates) -> Potential:
    q0, p0, q1, p1 = akns.coeffs
    return Potential(np.stack([q0 + 1j * p0, q0 - 1j * p0, q1 + 1j * p1, q1 - 1j * p1]))


def random_potential(
    rng: np.random.Generator,
    norm: float = 1.0,
    K: int = DEFAULT_K,
    symmetry: SymmetryClass = SymmetryClass.GENERAL,
) -> Potential:
    """Random potential with the given H^1-type norm.

    Coefficients are drawn with an H^1-balanced decay so the sample is not
    dominated by its highest mode, then rescaled to the requested norm.  For
    real or imaginary type the draw is symmetrized before rescaling.
    """
    k = fourier.frequencies(K)
    decay = 1.0 / (1.0 + (2 * np.pi * k) ** 2)
    c = (rng.standard_normal((4, 2 * K + 1)) + 1j * rng.standard_normal((4, 2 * K + 1)))
    c = c * decay
    psi = Potential(c)
    if symmetry is SymmetryClass.REAL_TYPE:
        psi = Potential(0.5 * (psi.coeffs + star_conjugate(psi).coeffs))
    elif symmetry is SymmetryClass.IMAGINARY_TYPE:
        psi = Potential(0.5 * (psi.coeffs - star_conjugate(psi).coeffs))
    current = psi.norm()
    if current == 0.0:
        return psi
    return psi.scaled(norm / current)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def to_json_dict(psi: Potential) -> dict:
    """{"K": int, "coeffs": [[[re, im], ...] x4]} with k = -K..K ordering."""
    return {
        "K": psi.K,
        "coeffs": [
            [[float(z.real), float(z.imag)] for z in row] for row in psi.coeffs
        ],
    }


def from_json_dict(data: dict) -> Potential:
    """Parse either the explicit-coefficient schema or the single-exponential
    shorthand {"singleexp": {"sigma": +-1, "omega": w, "alpha": [re,im],
    "c": [re,im]}}."""
    if "singleexp" in data:
        from .singleexp import SingleExpParams, as_potential

        d = data["singleexp"]
        params = SingleExpParams(
            alpha=complex(d["alpha"][0], d["alpha"][1]),
            c=complex(d["c"][0], d["c"][1]),
            omega=float(d["omega"]),
            sigma=int(d["sigma"]),
        )
        return as_potential(params)
    K = int(data["K"])
    rows = data["coeffs"]
    if len(rows) != 4 or any(len(r) != 2 * K + 1 for r in rows):
        raise ValueError("coeffs must be 4 rows of length 2K+1")
    c = np.array(
        [[complex(re, im) for re, im in row] for row in rows], dtype=complex
    )
    return Potential(c)


def load(path: str) -> Potential:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))


def save(psi: Potential, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(psi), fh)
