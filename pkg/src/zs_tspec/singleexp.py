"""Closed-form transfer matrices for one-mode exponential potentials.

For psi(t) = (alpha e^{i w t}, sigma conj(alpha) e^{-i w t},
              c e^{i w t},     sigma conj(c) e^{-i w t}),  w in 2 pi Z,

the system has constant coefficients after conjugation by e^{(i w / 2) t
sigma3}, so M(t, lam) is elementary:

    M = e^{(i w / 2) t sigma3} [ cos(Om t) I + sin(Om t) B(lam) ],

    B = [[ (4 lam^2 + 2 sigma |alpha|^2 + w) / (2 i Om),  (2 alpha lam + i c)/Om ],
         [ sigma (2 conj(alpha) lam - i conj(c))/Om,      -B11                  ]],

    Om(lam)^2 = 4 lam^4 + 2 w lam^2 + 4 sigma Im(conj(alpha) c) lam
                + (w/2 + sigma |alpha|^2)^2 - sigma |c|^2.

M is even in Om, so the matrix needs no branch choice; the reported Om itself
is fixed by Om = 2 lam^2 + w/2 + O(1/lam) at infinity and continued inward by
continuity.  This family is the exact oracle used to validate the numerical
solvers, and sigma = +1 / -1 gives real- / imaginary-type potentials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BranchTrackingFailed
from .potential import Potential

_SINC_SERIES_CUT = 1e-4


@dataclass(frozen=True)
class SingleExpParams:
    alpha: complex
    c: complex
    omega: float
    sigma: int

    def __post_init__(self):
        if self.sigma not in (1, -1):
            raise ValueError("sigma must be +1 or -1")
        k = self.omega / (2.0 * np.pi)
        if abs(k - round(k)) > 1e-12:
            raise ValueError("omega must be an integer multiple of 2 pi")

    @property
    def mode(self) -> int:
        return int(round(self.omega / (2.0 * np.pi)))


def as_potential(p: SingleExpParams) -> Potential:
    """Exact Fourier representation (one mode per component)."""
    k0 = p.mode
    K = max(abs(k0), 1)
    c = np.zeros((4, 2 * K + 1), dtype=complex)
    c[0, K + k0] = p.alpha
    c[1, K - k0] = p.sigma * np.conj(p.alpha)
    c[2, K + k0] = p.c
    c[3, K - k0] = p.sigma * np.conj(p.c)
    return Potential(c)


def plane_wave_params(sigma: int, omega: float, alpha: complex) -> SingleExpParams:
    """Parameters arising from the exact plane wave u = alpha e^{i beta x + i w t}
    with beta^2 = -2 sigma |alpha|^2 - w, sampled at x = 0 (so c = i alpha beta)."""
    beta_sq = -2.0 * sigma * abs(alpha) ** 2 - omega
    if beta_sq <= 0:
        raise ValueError("no real plane-wave wavenumber for these parameters")
    beta = np.sqrt(beta_sq)
    return SingleExpParams(alpha=alpha, c=1j * alpha * beta, omega=omega, sigma=sigma)


def radicand(p: SingleExpParams, lam) -> np.ndarray:
    """The quartic Om^2(lam)."""
    lam = np.asarray(lam, dtype=complex)
    const = (p.omega / 2.0 + p.sigma * abs(p.alpha) ** 2) ** 2 - p.sigma * abs(p.c) ** 2
    lin = 4.0 * p.sigma * np.imag(np.conj(p.alpha) * p.c)
    return 4.0 * lam**4 + 2.0 * p.omega * lam**2 + lin * lam + const


def omega_branch(p: SingleExpParams, lam: complex) -> complex:
    """Om(lam) on the branch with Om = 2 lam^2 + w/2 + O(1/lam) at infinity.

    For |lam| >= 10 the asymptotic target picks the root directly; closer in,
    the branch is continued along the ray from (10 lam / |lam|) to lam with
    step halving whenever continuity of the running value is lost.
    """
    lam = complex(lam)
    target = lambda z: 2.0 * z**2 + p.omega / 2.0  # noqa: E731

    def pick_near(z, ref):
        root = np.sqrt(complex(radicand(p, z)))
        return root if abs(root - ref) <= abs(-root - ref) else -root

    if abs(lam) >= 10.0:
        return pick_near(lam, target(lam))
    direction = lam / abs(lam) if lam != 0 else 1.0 + 0j
    z = 10.0 * direction
    current = pick_near(z, target(z))
    remaining = lam - z
    total = abs(remaining)
    step = 1.0  # fraction of the remaining segment
    while abs(z - lam) > 0:
        step = min(step, 1.0)
        z_next = z + (lam - z) * step
        root = np.sqrt(complex(radicand(p, z_next)))
        cand = root if abs(root - current) <= abs(-root - current) else -root
        jump = abs(cand - current)
        # continuity: strictly closer to the running value than to its negative
        if jump < abs(cand + current) or jump <= 1e-12:
            z = z_next
            current = cand
            step *= 2.0
        else:
            step *= 0.5
            if step * abs(lam - z) < 1e-6 * max(total, 1.0):
                raise BranchTrackingFailed(
                    f"square-root branch could not be continued to {lam}"
                )
    return current


def closed_form_M(p: SingleExpParams, lam, t: float) -> np.ndarray:
    """M(t, lam) for the one-mode potential; vectorised over lam.

    sin(Om t)/Om is evaluated by series for |Om t| < 1e-4, which covers the
    removable singularity at zeros of the radicand.
    """
    lam = np.asarray(lam, dtype=complex)
    scalar = lam.ndim == 0
    lam = np.atleast_1d(lam)
    om_sq = radicand(p, lam)
    om = np.sqrt(om_sq)  # branch irrelevant: cos and sin(x)/x are even
    arg = om * t
    small = np.abs(arg) < _SINC_SERIES_CUT
    cos_t = np.cos(arg)
    x2 = om_sq * t * t
    sinc = np.where(
        small,
        t * (1.0 - x2 / 6.0 + x2 * x2 / 120.0),
        np.sin(np.where(small, 1.0, arg)) / np.where(small, 1.0, om),
    )
    diag = (4.0 * lam**2 + 2.0 * p.sigma * abs(p.alpha) ** 2 + p.omega) / 2j
    core = np.empty(lam.shape + (2, 2), dtype=complex)
    core[..., 0, 0] = cos_t + diag * sinc
    core[..., 1, 1] = cos_t - diag * sinc
    core[..., 0, 1] = (2.0 * p.alpha * lam + 1j * p.c) * sinc
    core[..., 1, 0] = p.sigma * (2.0 * np.conj(p.alpha) * lam - 1j * np.conj(p.c)) * sinc
    half = np.exp(0.5j * p.omega * t)
    core[..., 0, :] *= half
    core[..., 1, :] *= 1.0 / half
    return core[0] if scalar else core


def closed_form_discriminant(p: SingleExpParams, lam) -> np.ndarray:
    """tr M(1, lam) from the closed form.  For w = -2 pi this reduces to
    -2 cos(Om); for general w in 2 pi Z the trace is taken directly."""
    m = closed_form_M(p, lam, 1.0)
    return m[..., 0, 0] + m[..., 1, 1]


FIGURE_PARAMS: dict[str, SingleExpParams] = {
    "1a": SingleExpParams(alpha=6.0 / 15.0 + 11.0j / 4.0, c=0.1, omega=-2.0 * np.pi, sigma=1),
    "1b": plane_wave_params(-1, -2.0 * np.pi, 0.5),
    "3a": plane_wave_params(1, -2.0 * np.pi, 1.0 / 12.0),
    "3b": plane_wave_params(-1, -2.0 * np.pi, 1.0 / 12.0),
    "3c": plane_wave_params(1, -2.0 * np.pi, 0.5),
    "3d": plane_wave_params(-1, -2.0 * np.pi, 0.5),
    "5": SingleExpParams(alpha=6.0 / 15.0 + 11.0j / 4.0, c=0.1, omega=-2.0 * np.pi, sigma=1),
}


def figure_potential(figure_id: str) -> Potential:
    return as_potential(FIGURE_PARAMS[figure_id])


def figure_dataset(figure_id: str, n_max: int = 4, tol: float = 1e-9) -> dict:
    """Parameter set, periodic spectrum, localization discs and traced zero set
    for one of the catalogued one-mode examples; everything JSON-friendly."""
    from . import spectra, zeroset
    from .potential import classify, SymmetryClass

    if figure_id not in FIGURE_PARAMS:
        raise KeyError(f"unknown figure id {figure_id!r}")
    p = FIGURE_PARAMS[figure_id]
    psi = as_potential(p)
    eigs = spectra.locate_spectrum("periodic", psi, n_max=n_max, tol=tol)
    minimal_n = spectra.minimal_counting_index("periodic", psi, n_max=n_max)
    arcs = []
    if classify(psi) is not SymmetryClass.GENERAL:
        for n in range(-n_max, n_max + 1):
            if n == 0:
                continue
            try:
                arc = zeroset.trace_arc(psi, n, tol=max(tol, 1e-9))
            except Exception:  # missing crossing for this n: skip the arc
                continue
            arcs.append(arc)
    discs = [spectra.disc_bn(minimal_n)]
    for n in range(1, n_max + 1):
        for i in (1, 2):
            discs.append(spectra.disc_din(i, n))
            discs.append(spectra.disc_din(i, -n))
    zero_samples = []
    for arc in arcs:
        zero_samples.extend([[float(z.real), float(z.imag)] for z in arc.samples])
    return {
        "figure": figure_id,
        "params": {
            "sigma": p.sigma,
            "omega": float(p.omega),
            "alpha": [float(p.alpha.real), float(p.alpha.imag)],
            "c": [float(np.real(p.c)), float(np.imag(p.c))],
        },
        "minimal_N": int(minimal_n),
        "eigenvalues": [e.to_dict() for e in eigs],
        "zero_set": zero_samples,
        "arcs": [arc.to_dict() for arc in arcs],
        "discs": [d.to_dict() for d in discs],
    }
