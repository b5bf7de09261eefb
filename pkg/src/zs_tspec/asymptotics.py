"""Large-|lam| approximants of the transfer matrix and their validation.

With theta = 2 lam^2 the transfer matrix behaves like

    M_p(t, lam) = Z_p(t, lam) e^{-i theta t sigma3} + W_p(t, lam) e^{i theta t sigma3},

    Z_p = I + Z1/lam + Z2od/lam^2,      W_p = W1/lam + W2/lam^2 + W3d/lam^3,

with coefficient matrices built from the potential and the running integral

    Gamma(t) = int_0^t (psi1 psi4 - psi2 psi3) dtau.

Z1 carries an off-diagonal part plus (Gamma/2) sigma3 on the diagonal, Z2od is
strictly off-diagonal, W3d strictly diagonal, and W1, W2 involve the initial
values psi_0 = psi(0).  The diagonal second-order coefficient of the
oscillating-with-e^{-i theta t} part is not determined at this order and is
taken as zero.  All t-dependent coefficients are evaluated from the Fourier
data in closed form, so no quadrature error enters the validation.

The error M - E_lam decays like 1/|lam| inside the strip weight
e^{2 |Im lam^2| t}; along the axis sequences lam = zeta^i_n the same estimate
gives a sup-norm decay O(n^{-1/2}), which validate_decay measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fourier, fundsol
from .errors import DegenerateLambda
from .potential import Potential

_DEGENERATE_CUT = 1e-8
_IM_SQ_GUARD = 8.0


def free_solution(lam: complex, t: float) -> np.ndarray:
    """E_lam(t) = diag(e^{-2 i lam^2 t}, e^{2 i lam^2 t})."""
    return fundsol.free_solution_batch(np.array([lam]), t)[0]


def free_solution_derivative_batch(lams, t) -> np.ndarray:
    """d/dlam of E_lam(t): diag(-4 i lam t e^{-2 i lam^2 t}, 4 i lam t e^{...})."""
    lams = np.asarray(lams, dtype=complex)
    phase = 2j * lams**2 * t
    out = np.zeros(lams.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = -4j * lams * t * np.exp(-phase)
    out[..., 1, 1] = 4j * lams * t * np.exp(phase)
    return out


def zeta(i: int, n: int) -> complex:
    """The reference points zeta^i_n: sqrt(n pi / 2) times 1, -1, i, -i."""
    root = np.sqrt(n * np.pi / 2.0)
    return {1: root, 2: -root, 3: 1j * root, 4: -1j * root}[i]


@dataclass
class AsymptoticCoefficients:
    """Closed-form coefficient matrices of the two-exponential approximant."""

    psi: Potential
    _gamma_coeffs: np.ndarray = field(init=False, repr=False)
    _psi0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = self.psi.coeffs
        self._gamma_coeffs = fourier.multiply(c[0], c[3]) - fourier.multiply(c[1], c[2])
        self._psi0 = self.psi.evaluate(0.0)

    def gamma(self, t):
        """Gamma(t) = int_0^t (psi1 psi4 - psi2 psi3); exact antiderivative."""
        return fourier.antiderivative_from_zero(self._gamma_coeffs, t)

    def z1(self, t) -> np.ndarray:
        p = self.psi.evaluate(t)
        g = self.gamma(t)
        out = np.zeros(np.shape(g) + (2, 2), dtype=complex)
        out[..., 0, 1] = -0.5j * p[0]
        out[..., 1, 0] = 0.5j * p[1]
        out[..., 0, 0] = 0.5 * g
        out[..., 1, 1] = -0.5 * g
        return out

    def z2_od(self, t) -> np.ndarray:
        p = self.psi.evaluate(t)
        g = self.gamma(t)
        out = np.zeros(np.shape(g) + (2, 2), dtype=complex)
        out[..., 0, 1] = 0.25 * (p[2] + 1j * p[0] * g)
        out[..., 1, 0] = 0.25 * (p[3] + 1j * p[1] * g)
        return out

    def w1(self) -> np.ndarray:
        p0 = self._psi0
        return np.array([[0.0, 0.5j * p0[0]], [-0.5j * p0[1], 0.0]], dtype=complex)

    def w2(self, t) -> np.ndarray:
        p = self.psi.evaluate(t)
        p0 = self._psi0
        g = self.gamma(t)
        out = np.empty(np.shape(g) + (2, 2), dtype=complex)
        out[..., 0, 0] = -0.25 * p0[1] * p[0]
        out[..., 0, 1] = -0.25 * (-1j * p0[0] * g + p0[2])
        out[..., 1, 0] = -0.25 * (-1j * p0[1] * g + p0[3])
        out[..., 1, 1] = -0.25 * p0[0] * p[1]
        return out

    def w3_d(self, t) -> np.ndarray:
        p = self.psi.evaluate(t)
        p0 = self._psi0
        g = self.gamma(t)
        out = np.zeros(np.shape(g) + (2, 2), dtype=complex)
        out[..., 0, 0] = 0.125j * (-p0[1] * (p[2] + 1j * p[0] * g) + p0[3] * p[0])
        out[..., 1, 1] = 0.125j * (p0[0] * (p[3] + 1j * p[1] * g) - p0[2] * p[1])
        return out

    def z_p(self, lam, t) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        eye = np.zeros(np.shape(lam) + (2, 2), dtype=complex)
        eye[..., 0, 0] = 1.0
        eye[..., 1, 1] = 1.0
        inv = (1.0 / lam)[..., None, None]
        return eye + inv * self.z1(t) + inv**2 * self.z2_od(t)

    def w_p(self, lam, t) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        inv = (1.0 / lam)[..., None, None]
        return inv * self.w1() + inv**2 * self.w2(t) + inv**3 * self.w3_d(t)


def gamma(psi: Potential, t) -> np.ndarray:
    """Gamma(t, psi), exact for the Fourier representation."""
    return AsymptoticCoefficients(psi).gamma(t)


def approximant(psi: Potential, lam, t: float) -> np.ndarray:
    """M_p(t, lam) = Z_p e^{-i theta t sigma3} + W_p e^{i theta t sigma3}."""
    lam = np.asarray(lam, dtype=complex)
    if np.any(np.abs(lam) < _DEGENERATE_CUT):
        raise DegenerateLambda("approximant requires |lam| >= 1e-8")
    coeffs = AsymptoticCoefficients(psi)
    scalar = lam.ndim == 0
    lam = np.atleast_1d(lam)
    zp = coeffs.z_p(lam, t)
    wp = coeffs.w_p(lam, t)
    e_minus = np.exp(-2j * lam**2 * t)
    out = np.empty_like(zp)
    out[..., :, 0] = zp[..., :, 0] * e_minus[..., None]
    out[..., :, 1] = zp[..., :, 1] / e_minus[..., None]
    out[..., :, 0] += wp[..., :, 0] / e_minus[..., None]
    out[..., :, 1] += wp[..., :, 1] * e_minus[..., None]
    return out[0] if scalar else out


def validate_decay(psi: Potential, lam_list, t_grid=None,
                   tol: float = 1e-9) -> dict:
    """Weighted and unweighted sup-norm residuals of M against E_lam.

    For each lam the report holds sup_t |lam| e^{-2|Im lam^2| t} |M - E_lam|
    (the quantity bounded by the asymptotic estimate) together with the plain
    sup_t |M - E_lam|.  The 'bounded' flag records whether the weighted
    sequence stays below twice its median.  Parameters with |Im lam^2| > 8
    are rejected to keep the weight representable.
    """
    lams = np.atleast_1d(np.asarray(lam_list, dtype=complex))
    if lams.size == 0:
        raise ValueError("lam_list must be nonempty")
    if np.max(np.abs((lams**2).imag)) > _IM_SQ_GUARD:
        raise ValueError("validation restricted to |Im lam^2| <= 8")
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 17)
    t_grid = np.asarray(t_grid, dtype=float)
    grid_times, traj = fundsol.trajectory(psi, lams, 1.0, tol)
    n = grid_times.shape[0] - 1
    idx = np.rint(t_grid * n).astype(int)
    weighted = np.zeros(lams.shape[0])
    plain = np.zeros(lams.shape[0])
    for j, t in zip(idx, t_grid):
        e = fundsol.free_solution_batch(lams, grid_times[j])
        diff = np.abs(traj[j] - e).reshape(lams.shape[0], -1).max(axis=1)
        w = np.abs(lams) * np.exp(-2.0 * np.abs((lams**2).imag) * grid_times[j])
        weighted = np.maximum(weighted, w * diff)
        plain = np.maximum(plain, diff)
    med = float(np.median(weighted))
    rows = [
        {"lambda": [float(l.real), float(l.imag)],
         "residual": float(wr), "sup_diff": float(pr)}
        for l, wr, pr in zip(lams, weighted, plain)
    ]
    return {
        "rows": rows,
        "median": med,
        "bounded": bool(np.all(weighted <= 2.0 * med + 1e-30)),
    }


def decay_slope(psi: Potential, i: int, n_values, tol: float = 1e-9) -> float:
    """Least-squares slope of log sup|M - E| against log n along zeta^i_n."""
    n_values = np.asarray(list(n_values), dtype=int)
    lams = np.array([zeta(i, int(n)) for n in n_values])
    report = validate_decay(psi, lams, tol=tol)
    sup = np.array([row["sup_diff"] for row in report["rows"]])
    x = np.log(n_values.astype(float))
    y = np.log(sup)
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)
