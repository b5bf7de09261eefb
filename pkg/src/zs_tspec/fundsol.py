"""Fundamental matrix solution of the time-periodic 2x2 quadratic-pencil system.

The object of study is the unique matrix solution of

    M_t = (R(lam) + V(t, lam)) M,    M(0) = I,

with R = -2 i lam^2 sigma3 and the potential matrix V = V0(t) + lam V1(t)
built from a four-component period-1 potential (see potential.py).  Since
trace(R + V) = 0, det M(t) = 1 identically; the inverse is therefore always
the adjugate, never a numerical inversion.

Two independent computational routes are provided:

* ``OdeIntegration``: a fourth-order commutator-free Magnus integrator.  Each
  step multiplies by exact exponentials of traceless 2x2 matrices evaluated at
  the two-point Gauss nodes, so the free evolution exp(-2 i lam^2 sigma3 t) is
  reproduced exactly and each step propagator has unit determinant by
  construction.  The step count is doubled until two consecutive grids agree
  to the requested tolerance.

* ``PicardSeries``: the iterated-integral series M = sum_n M_n with
  M_{n+1}(t) = int_0^t E(t-s) V(s) M_n(s) ds, evaluated by a sixth-order
  composite quadrature on a uniform grid (doubled until converged) and
  truncated once the certified majorant
  e^{2|Im lam^2| t} (2 max(1,|lam|) sqrt(t) C)^n / n!  falls below tolerance,
  where C is the quadrature value of the L2 bound on |V| / (2 max(1,|lam|)).

Everything is vectorised over batches of lam values; the batched entry points
are what the spectral modules build on.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import fourier
from .errors import NonConvergence
from .potential import Potential

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

METHOD_PICARD = "PicardSeries"
METHOD_ODE = "OdeIntegration"
METHOD_CLOSED = "ClosedForm"

# two-point Gauss nodes and the fourth-order commutator-free weights
_SQRT3 = np.sqrt(3.0)
_C1 = 0.5 - _SQRT3 / 6.0
_C2 = 0.5 + _SQRT3 / 6.0
_A1 = 0.25 + _SQRT3 / 6.0
_A2 = 0.25 - _SQRT3 / 6.0

# |exp(2 |Im lam^2| t)| beyond this is useless in double precision
_MAX_LOG_RANGE = 600.0

_DEFAULT_TOL = 1e-10
_ODE_N0 = 128
_ODE_N_CAP = 1 << 16
_PICARD_N_CAP = 1 << 15
_PICARD_MAX_TERMS = 150


@dataclass(frozen=True)
class TransferMatrix:
    """Value of the fundamental solution at one (t, lam), with metadata."""

    matrix: np.ndarray
    t: float
    lam: complex
    method: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("matrix must be 2x2")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def m1(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def m2(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def m3(self) -> complex:
        return complex(self.matrix[1, 0])

    @property
    def m4(self) -> complex:
        return complex(self.matrix[1, 1])

    @property
    def det(self) -> complex:
        return self.m1 * self.m4 - self.m2 * self.m3

    @property
    def trace(self) -> complex:
        return self.m1 + self.m4

    def inverse(self) -> np.ndarray:
        """Inverse via the unit-determinant (adjugate) formula."""
        return adjugate(self.matrix)


@dataclass(frozen=True)
class CoefficientMatrices:
    """The matrices R(lam), V0(t), V1(t) of the linear system for one potential."""

    psi: Potential

    def v0(self, t) -> np.ndarray:
        p1, p2, p3, p4 = self.psi.evaluate(t)
        prod = p1 * p2
        out = np.empty(np.shape(prod) + (2, 2), dtype=complex)
        out[..., 0, 0] = -1j * prod
        out[..., 0, 1] = 1j * p3
        out[..., 1, 0] = -1j * p4
        out[..., 1, 1] = 1j * prod
        return out

    def v1(self, t) -> np.ndarray:
        p1, p2, _, _ = self.psi.evaluate(t)
        out = np.zeros(np.shape(p1) + (2, 2), dtype=complex)
        out[..., 0, 1] = 2.0 * p1
        out[..., 1, 0] = 2.0 * p2
        return out

    @staticmethod
    def r(lam: complex) -> np.ndarray:
        return -2j * lam**2 * SIGMA3

    def v(self, t, lam: complex) -> np.ndarray:
        return self.v0(t) + lam * self.v1(t)


def adjugate(m: np.ndarray) -> np.ndarray:
    """Adjugate of 2x2 matrices (equals the inverse when det = 1)."""
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out


def free_solution_batch(lams: np.ndarray, t) -> np.ndarray:
    """E_lam(t) = diag(e^{-2 i lam^2 t}, e^{2 i lam^2 t}) for a batch of lam."""
    lams = np.asarray(lams, dtype=complex)
    phase = 2j * lams**2 * t
    out = np.zeros(lams.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(-phase)
    out[..., 1, 1] = np.exp(phase)
    return out


# ---------------------------------------------------------------------------
# low-level pieces
# ---------------------------------------------------------------------------

def _expm_traceless(x: np.ndarray) -> np.ndarray:
    """Exact exponential of traceless 2x2 matrices.

    For traceless X one has X^2 = q I with q = X11^2 + X12 X21, hence
    exp(X) = cosh(s) I + (sinh(s)/s) X with s = sqrt(q); both factors are
    even in s so the square-root branch is irrelevant.
    """
    a = x[..., 0, 0]
    q = a * a + x[..., 0, 1] * x[..., 1, 0]
    s = np.sqrt(q)
    small = np.abs(q) < 1e-10
    ssafe = np.where(small, 1.0, s)
    ch = np.cosh(s)
    sh = np.where(small, 1.0 + q / 6.0 + q * q / 120.0, np.sinh(ssafe) / ssafe)
    out = x * sh[..., None, None]
    out[..., 0, 0] += ch
    out[..., 1, 1] += ch
    return out


def _expm_traceless_with_diff(x: np.ndarray, dx: np.ndarray):
    """exp(X) and its differential d(exp X) along a traceless direction dX.

    Because exp(X) = c(q) I + u(q) X with q = X11^2 + X12 X21 is closed-form
    in the entries, its derivative is too:

        d exp(X) = (u/2) dq I + u'(q) dq X + u dX,
        u'(q) = (c - u) / (2 q),    dq = 2 X11 dX11 + dX12 X21 + X12 dX21.
    """
    a = x[..., 0, 0]
    q = a * a + x[..., 0, 1] * x[..., 1, 0]
    dq = (2.0 * a * dx[..., 0, 0] + dx[..., 0, 1] * x[..., 1, 0]
          + x[..., 0, 1] * dx[..., 1, 0])
    s = np.sqrt(q)
    small = np.abs(q) < 1e-6
    ssafe = np.where(small, 1.0, s)
    ch = np.cosh(s)
    u = np.where(small, 1.0 + q / 6.0 + q * q / 120.0, np.sinh(ssafe) / ssafe)
    qsafe = np.where(small, 1.0, q)
    uprime = np.where(small, 1.0 / 6.0 + q / 60.0 + q * q / 1680.0,
                      (ch - u) / (2.0 * qsafe))
    e = x * u[..., None, None]
    e[..., 0, 0] += ch
    e[..., 1, 1] += ch
    de = dx * u[..., None, None] + x * (uprime * dq)[..., None, None]
    half_udq = 0.5 * u * dq
    de[..., 0, 0] += half_udq
    de[..., 1, 1] += half_udq
    return e, de


def _v_parts_at(psi: Potential, times: np.ndarray):
    """V0 and V1 sampled at an array of times; shapes (m, 2, 2)."""
    vals = psi.evaluate(times)  # (4, m)
    p1, p2, p3, p4 = vals
    prod = p1 * p2
    m = times.shape[0]
    v0 = np.zeros((m, 2, 2), dtype=complex)
    v0[:, 0, 0] = -1j * prod
    v0[:, 0, 1] = 1j * p3
    v0[:, 1, 0] = -1j * p4
    v0[:, 1, 1] = 1j * prod
    v1 = np.zeros((m, 2, 2), dtype=complex)
    v1[:, 0, 1] = 2.0 * p1
    v1[:, 1, 0] = 2.0 * p2
    return v0, v1


def _step_propagators(psi: Potential, lams: np.ndarray, t0: float, h: float,
                      n: int, with_derivative: bool = False):
    """Per-step propagators S_k of the Magnus scheme, shape (B, n, 2, 2);
    optionally together with their exact lam-derivatives T_k = dS_k/dlam."""
    k = np.arange(n)
    v0a, v1a = _v_parts_at(psi, t0 + (k + _C1) * h)
    v0b, v1b = _v_parts_at(psi, t0 + (k + _C2) * h)
    w0_first = h * (_A1 * v0a + _A2 * v0b)
    w1_first = h * (_A1 * v1a + _A2 * v1b)
    w0_second = h * (_A2 * v0a + _A1 * v0b)
    w1_second = h * (_A2 * v1a + _A1 * v1b)
    lam = lams[:, None, None, None]
    rterm = (-1j * h * lams**2)[:, None, None, None] * SIGMA3
    g1 = w0_first[None] + lam * w1_first[None] + rterm
    g2 = w0_second[None] + lam * w1_second[None] + rterm
    if not with_derivative:
        return _expm_traceless(g2) @ _expm_traceless(g1), None
    drterm = (-2j * h * lams)[:, None, None, None] * SIGMA3
    dg1 = w1_first[None] + drterm
    dg2 = w1_second[None] + drterm
    e1, de1 = _expm_traceless_with_diff(g1, dg1)
    e2, de2 = _expm_traceless_with_diff(g2, dg2)
    return e2 @ e1, de2 @ e1 + e2 @ de1


def _reduce_time_ordered(s: np.ndarray) -> np.ndarray:
    """Product S_{n-1} ... S_0 by pairwise tree reduction; s is (B, n, 2, 2)."""
    while s.shape[1] > 1:
        m = s.shape[1] // 2
        prod = s[:, 1 : 2 * m : 2] @ s[:, 0 : 2 * m : 2]
        if s.shape[1] % 2:
            prod = np.concatenate([prod, s[:, -1:]], axis=1)
        s = prod
    return s[:, 0]


def _prefix_time_ordered(s: np.ndarray) -> np.ndarray:
    """All prefix products P_k = S_k ... S_0 (inclusive scan); (B, n, 2, 2)."""
    p = s.copy()
    d = 1
    n = p.shape[1]
    while d < n:
        p[:, d:] = p[:, d:] @ p[:, :-d]
        d *= 2
    return p


def _reduce_pair_time_ordered(s: np.ndarray, t: np.ndarray):
    """Tree reduction of (propagator, derivative) pairs under the composition
    (S2, T2) o (S1, T1) = (S2 S1, T2 S1 + S2 T1); time order as above."""
    while s.shape[1] > 1:
        m = s.shape[1] // 2
        se, so = s[:, 0 : 2 * m : 2], s[:, 1 : 2 * m : 2]
        te, to = t[:, 0 : 2 * m : 2], t[:, 1 : 2 * m : 2]
        s_new = so @ se
        t_new = to @ se + so @ te
        if s.shape[1] % 2:
            s_new = np.concatenate([s_new, s[:, -1:]], axis=1)
            t_new = np.concatenate([t_new, t[:, -1:]], axis=1)
        s, t = s_new, t_new
    return s[:, 0], t[:, 0]


def _prefix_pair_time_ordered(s: np.ndarray, t: np.ndarray):
    """Inclusive scan of (propagator, derivative) pairs."""
    s = s.copy()
    t = t.copy()
    d = 1
    n = s.shape[1]
    while d < n:
        s_new = s[:, d:] @ s[:, :-d]
        t_new = t[:, d:] @ s[:, :-d] + s[:, d:] @ t[:, :-d]
        s[:, d:] = s_new
        t[:, d:] = t_new
        d *= 2
    return s, t


# sixth-order cumulative quadrature on a uniform grid ------------------------

def _interval_weights(shift: int) -> np.ndarray:
    """Weights w_m with sum_m w_m (shift+m)^q = 1/(q+1), q = 0..5.

    Integrates the quintic through the 6 samples f[j+shift .. j+shift+5]
    over the interval [t_j, t_{j+1}] (in units of h).
    """
    offs = shift + np.arange(6)
    a = np.vander(offs, 6, increasing=True).T.astype(float)
    b = 1.0 / (1.0 + np.arange(6))
    return np.linalg.solve(a, b)


_W_MAIN = _interval_weights(-2)
_W_EDGE = {0: _interval_weights(0), -1: _interval_weights(-1),
           -3: _interval_weights(-3), -4: _interval_weights(-4)}


def cumulative_integral(f: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral of samples f over a uniform grid (axis 0).

    f has shape (n+1, ...) with n >= 5; the result has the same shape and
    holds int_{t_0}^{t_j} f for every grid point, accurate to O(h^6) for
    smooth integrands (local quintic interpolation per interval).
    """
    n = f.shape[0] - 1
    if n < 5:
        raise ValueError("need at least 6 samples")
    out = np.empty_like(f)
    out[0] = 0.0
    incr = out[1:]
    # interior intervals j = 2..n-3 use the centred stencil f[j-2..j+3]
    body = incr[2 : n - 2]
    body[:] = _W_MAIN[0] * f[0 : n - 4]
    for m in range(1, 6):
        body += _W_MAIN[m] * f[m : m + n - 4]
    for j, shift in ((0, 0), (1, -1), (n - 2, -3), (n - 1, -4)):
        base = j + shift
        w = _W_EDGE[shift]
        incr[j] = (
            w[0] * f[base] + w[1] * f[base + 1] + w[2] * f[base + 2]
            + w[3] * f[base + 3] + w[4] * f[base + 4] + w[5] * f[base + 5]
        )
    np.cumsum(incr, axis=0, out=incr)
    out *= h
    return out


def integrate_uniform(f: np.ndarray, h: float) -> np.ndarray:
    """Definite integral over the whole uniform grid (axis 0), O(h^6)."""
    return cumulative_integral(f, h)[-1]


# ---------------------------------------------------------------------------
# ODE route
# ---------------------------------------------------------------------------

def _entry_scale(m: np.ndarray) -> np.ndarray:
    """max(1, largest entry magnitude) per batch element."""
    return np.maximum(1.0, np.abs(m).reshape(m.shape[0], -1).max(axis=1))


def _check_range(lams: np.ndarray, t_end: float, factor: float = 2.0) -> None:
    worst = factor * np.max(np.abs((np.asarray(lams) ** 2).imag)) * t_end
    if worst > _MAX_LOG_RANGE:
        raise NonConvergence(
            "exp(2|Im lam^2| t) exceeds double-precision range", residual=worst
        )


def _ode_run(psi, lams, t_end, n, want_traj, want_mdot):
    h = t_end / n
    steps, dsteps = _step_propagators(psi, lams, 0.0, h, n,
                                      with_derivative=want_mdot)
    out = {}
    b = lams.shape[0]
    if not want_traj:
        if want_mdot:
            out["M"], out["Mdot"] = _reduce_pair_time_ordered(steps, dsteps)
        else:
            out["M"] = _reduce_time_ordered(steps)
        return out
    t_grid = np.linspace(0.0, t_end, n + 1)
    out["t_grid"] = t_grid
    if want_mdot:
        ps, pt = _prefix_pair_time_ordered(steps, dsteps)
    else:
        ps, pt = _prefix_time_ordered(steps), None
    traj = np.empty((n + 1, b, 2, 2), dtype=complex)
    traj[0] = IDENTITY2
    traj[1:] = np.moveaxis(ps, 1, 0)
    out["traj"] = traj
    out["M"] = traj[-1].copy()
    if want_mdot:
        dtraj = np.zeros((n + 1, b, 2, 2), dtype=complex)
        dtraj[1:] = np.moveaxis(pt, 1, 0)
        out["dtraj"] = dtraj
        out["Mdot"] = dtraj[-1].copy()
    return out


def _ode_adaptive(psi, lams, t_end, tol, want_traj=False, want_mdot=False,
                  n0=_ODE_N0, n_cap=_ODE_N_CAP):
    """Magnus integration with grid doubling until self-consistent to tol."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    _check_range(lams, t_end)
    if t_end == 0.0:
        b = lams.shape[0]
        eye = np.broadcast_to(IDENTITY2, (b, 2, 2)).copy()
        out = {"M": eye, "t_grid": np.array([0.0]),
               "traj": eye[None].copy(), "n": 0}
        if want_mdot:
            out["Mdot"] = np.zeros((b, 2, 2), dtype=complex)
        return out
    n = n0
    prev = _ode_run(psi, lams, t_end, n, want_traj, want_mdot)
    diff = np.inf
    while True:
        n2 = 2 * n
        if n2 > n_cap:
            raise NonConvergence(
                "step budget exhausted in Magnus integration",
                residual=float(diff),
            )
        cur = _ode_run(psi, lams, t_end, n2, want_traj, want_mdot)
        scale = _entry_scale(cur["M"])
        diff = np.max(np.abs(cur["M"] - prev["M"]).reshape(len(lams), -1).max(axis=1)
                      / scale)
        if want_mdot:
            dscale = _entry_scale(cur["Mdot"])
            diff = max(diff, np.max(
                np.abs(cur["Mdot"] - prev["Mdot"]).reshape(len(lams), -1).max(axis=1)
                / dscale))
        if diff <= 8.0 * tol:
            cur["n"] = n2
            return cur
        prev = cur
        n = n2


def _ode_solve(psi, lams, t_end, tol, want_traj=False, want_mdot=False,
               n0=_ODE_N0, max_chunk_elems=1 << 19):
    """Chunked wrapper so n * batch stays within a memory budget."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    b = lams.shape[0]
    est_n = max(n0, _ODE_N0)
    chunk = max(1, max_chunk_elems // max(est_n, 1))
    if b <= chunk or want_traj:
        # trajectory consumers keep their batches small; chunking them would
        # mix grids of different resolution
        return _ode_adaptive(psi, lams, t_end, tol, want_traj, want_mdot, n0=n0)
    pieces = [
        _ode_adaptive(psi, lams[i : i + chunk], t_end, tol, want_traj,
                      want_mdot, n0=n0)
        for i in range(0, b, chunk)
    ]
    out = {"M": np.concatenate([p["M"] for p in pieces], axis=0)}
    if want_mdot:
        out["Mdot"] = np.concatenate([p["Mdot"] for p in pieces], axis=0)
    return out


# ---------------------------------------------------------------------------
# Picard-series route
# ---------------------------------------------------------------------------

def _picard_bound_terms(psi: Potential, lams: np.ndarray, t_end: float,
                        t_grid: np.ndarray, tol: float, max_terms: int):
    """Number of series terms needed per lam, from the certified majorant.

    |M_n(t)| <= e^{2|Im lam^2| t} (int_0^t |V|)^n / n!
            <= e^{2|Im lam^2| t} (2 max(1,|lam|) sqrt(t) C(psi,t))^n / n!,
    so relative to the e^{2|Im lam^2| t} scale the tail is controlled by
    kappa^n / n! with kappa = 2 max(1,|lam|) sqrt(t) C.
    """
    vals = psi.evaluate(t_grid)
    g = np.maximum(np.abs(vals[0] * vals[1]),
                   np.maximum(np.abs(vals[0]) + np.abs(vals[2]),
                              np.abs(vals[1]) + np.abs(vals[3])))
    h = t_grid[1] - t_grid[0]
    c = np.sqrt(max(integrate_uniform(g**2, h).real, 0.0))
    kappa = 2.0 * np.maximum(1.0, np.abs(lams)) * np.sqrt(t_end) * c
    log_bound = np.zeros_like(kappa)
    n_star = np.full(lams.shape, -1, dtype=int)
    log_tol = np.log(tol)
    with np.errstate(divide="ignore"):
        log_kappa = np.log(np.maximum(kappa, 1e-300))
    for n in range(1, max_terms + 1):
        log_bound = log_bound + log_kappa - np.log(n)
        done = (log_bound < log_tol) & (n_star < 0)
        n_star[done] = n
        if np.all(n_star > 0):
            break
    return n_star, kappa


def _picard_run(psi: Potential, lams: np.ndarray, t_end: float, n: int,
                n_terms: int, tol: float, kappa_max: float):
    """One fixed-grid evaluation of the truncated series; returns M at t_end.

    Terminates early once past the majorant hump (term index > kappa) when
    the actual terms have dropped two consecutive times below tol/100 of the
    running scale; the certified bound keeps n_terms as a hard cap.
    """
    t_grid = np.linspace(0.0, t_end, n + 1)
    h = t_grid[1] - t_grid[0]
    v0, v1 = _v_parts_at(psi, t_grid)  # (n+1, 2, 2)
    v = v0[:, None] + lams[None, :, None, None] * v1[:, None]  # (n+1, B, 2, 2)
    phase = np.multiply.outer(t_grid, 2j * lams**2)  # (n+1, B)
    e_plus = np.exp(phase)[..., None]
    e_minus = np.exp(-phase)[..., None]
    b = lams.shape[0]
    term = np.zeros((n + 1, b, 2, 2), dtype=complex)
    term[..., 0, 0] = e_minus[..., 0]
    term[..., 1, 1] = e_plus[..., 0]
    total = term.copy()
    tiny_streak = 0
    for it in range(1, n_terms + 1):
        w = v @ term
        w[..., 0, :] *= e_plus
        w[..., 1, :] *= e_minus
        term = cumulative_integral(w, h)
        term[..., 0, :] *= e_minus
        term[..., 1, :] *= e_plus
        total += term
        if it > kappa_max:
            rel = np.max(np.abs(term[-1]).reshape(b, -1).max(axis=1)
                         / _entry_scale(total[-1]))
            tiny_streak = tiny_streak + 1 if rel < 0.01 * tol else 0
            if tiny_streak >= 2:
                break
    return total[-1]


def _picard_grid_guess(psi: Potential, lams: np.ndarray, t_end: float) -> int:
    """Initial quadrature grid from oscillation/growth rate of the integrand.

    The potential bandwidth enters through the highest mode still carrying
    weight, not the storage truncation order.
    """
    k = fourier.frequencies(psi.K)
    mass = np.abs(psi.coeffs).max(axis=0)
    thresh = 1e-13 * max(mass.max(), 1e-300)
    k_eff = int(np.max(np.abs(k[mass > thresh]), initial=0))
    rate = 4.0 * np.max(np.abs(lams)) ** 2 + 2.0 * np.pi * k_eff + 4.0
    n = 512
    while n < rate / 0.12 and n < _PICARD_N_CAP:
        n *= 2
    return n


def _picard_solve_group(psi, lams, t_end, tol, max_terms):
    probe = np.linspace(0.0, max(t_end, 1e-12), 513)
    n_star, kappa = _picard_bound_terms(psi, lams, t_end, probe, tol, max_terms)
    if np.any(n_star < 0):
        raise NonConvergence(
            "series majorant does not reach tolerance within the term budget",
            residual=float(np.max(kappa)),
        )
    n_terms = int(np.max(n_star))
    kappa_max = float(np.max(kappa))
    n = _picard_grid_guess(psi, lams, t_end)
    prev = _picard_run(psi, lams, t_end, n // 2, n_terms, tol, kappa_max)
    while True:
        cur = _picard_run(psi, lams, t_end, n, n_terms, tol, kappa_max)
        scale = _entry_scale(cur)
        diff = np.max(np.abs(cur - prev).reshape(len(lams), -1).max(axis=1) / scale)
        if diff <= 16.0 * tol:
            return cur
        if n >= _PICARD_N_CAP:
            raise NonConvergence(
                "quadrature grid budget exhausted in series evaluation",
                residual=float(diff),
            )
        prev = cur
        n *= 2


def _picard_solve(psi, lams, t_end, tol, max_terms=_PICARD_MAX_TERMS):
    """Series evaluation with certified truncation and grid-doubling check.

    The batch is split into groups of comparable |lam| so that moderate
    parameters are not integrated on the fine grids the extreme ones need.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    _check_range(lams, t_end, factor=4.0)
    if t_end == 0.0:
        return np.broadcast_to(IDENTITY2, (lams.shape[0], 2, 2)).copy()
    out = np.empty((lams.shape[0], 2, 2), dtype=complex)
    sq = np.abs(lams) ** 2
    bands = np.minimum(np.ceil(sq / 4.0).astype(int), 8)
    for band in np.unique(bands):
        idx = np.nonzero(bands == band)[0]
        out[idx] = _picard_solve_group(psi, lams[idx], t_end, tol, max_terms)
    return out


# ---------------------------------------------------------------------------
# public interface
# ---------------------------------------------------------------------------

def _resolve_method(method: str, lam_max: float) -> str:
    if method == "auto":
        return METHOD_ODE if lam_max > 6.0 else METHOD_PICARD
    if method not in (METHOD_PICARD, METHOD_ODE):
        raise ValueError(f"unknown method {method!r}")
    return method


_EVAL_CACHE: "OrderedDict[tuple, dict]" = OrderedDict()
_EVAL_CACHE_MAX = 64


def _cache_key(psi: Potential, lams: np.ndarray, tol: float) -> tuple:
    digest = hashlib.sha1()
    digest.update(psi.coeffs.tobytes())
    digest.update(lams.tobytes())
    digest.update(np.float64(tol).tobytes())
    return (digest.hexdigest(),)


def _cached_monodromy(psi, lams, tol, want_mdot):
    """Monodromy (and optionally its lam-derivative) with a small LRU cache.

    The four spectra repeatedly evaluate the same contour points of the same
    potential; entries computed with the derivative also serve plain
    monodromy requests.
    """
    key = _cache_key(psi, lams, tol)
    hit = _EVAL_CACHE.get(key)
    if hit is not None and (not want_mdot or "Mdot" in hit):
        _EVAL_CACHE.move_to_end(key)
        return hit
    out = _ode_solve(psi, lams, 1.0, tol, want_mdot=want_mdot)
    _EVAL_CACHE[key] = out
    _EVAL_CACHE.move_to_end(key)
    while len(_EVAL_CACHE) > _EVAL_CACHE_MAX:
        _EVAL_CACHE.popitem(last=False)
    return out


def fundamental_solution_batch(psi: Potential, lams, t: float = 1.0,
                               method: str = "auto",
                               tol: float = _DEFAULT_TOL) -> np.ndarray:
    """M(t, lam) for a batch of lam values; returns (B, 2, 2)."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if t > 2.0:
        raise ValueError("only 0 <= t <= 2 is supported")
    chosen = _resolve_method(method, float(np.max(np.abs(lams))) if lams.size else 0.0)
    if t > 1.0:
        head = fundamental_solution_batch(psi, lams, t - 1.0, method, tol)
        mono = fundamental_solution_batch(psi, lams, 1.0, method, tol)
        return head @ mono
    if chosen == METHOD_ODE:
        return _ode_solve(psi, lams, t, tol)["M"]
    return _picard_solve(psi, lams, t, tol)


def fundamental_solution(psi: Potential, lam: complex, t: float = 1.0,
                         method: str = "auto",
                         tol: float = _DEFAULT_TOL) -> TransferMatrix:
    """The matrix M(t, lam, psi) with |det - 1| controlled by tol."""
    chosen = _resolve_method(method, abs(lam))
    m = fundamental_solution_batch(psi, [lam], t, chosen, tol)[0]
    return TransferMatrix(m, t=t, lam=complex(lam), method=chosen)


def monodromy_batch(psi: Potential, lams, method: str = METHOD_ODE,
                    tol: float = _DEFAULT_TOL) -> np.ndarray:
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if method == METHOD_ODE:
        return _cached_monodromy(psi, lams, tol, want_mdot=False)["M"]
    return fundamental_solution_batch(psi, lams, 1.0, method, tol)


def monodromy(psi: Potential, lam: complex, method: str = "auto",
              tol: float = _DEFAULT_TOL) -> TransferMatrix:
    """M evaluated at one period, t = 1."""
    return fundamental_solution(psi, lam, 1.0, method, tol)


def lambda_derivative_batch(psi: Potential, lams, t: float = 1.0,
                            tol: float = _DEFAULT_TOL) -> np.ndarray:
    """dM/dlam at time t for a batch of lam, via the variation-of-constants
    formula dM(t) = M(t) int_0^t M^{-1}(s) N(s) M(s) ds."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if t == 0.0:
        return np.zeros((lams.shape[0], 2, 2), dtype=complex)
    return _ode_solve(psi, lams, t, tol, want_mdot=True)["Mdot"]


def lambda_derivative(psi: Potential, lam: complex, t: float = 1.0,
                      tol: float = _DEFAULT_TOL) -> TransferMatrix:
    m = lambda_derivative_batch(psi, [lam], t, tol)[0]
    return TransferMatrix(m, t=t, lam=complex(lam), method=METHOD_ODE)


def trajectory(psi: Potential, lams, t_end: float = 1.0,
               tol: float = _DEFAULT_TOL, n_min: int = _ODE_N0):
    """M on a uniform grid of [0, t_end]: returns (t_grid, traj) with traj of
    shape (n+1, B, 2, 2).  Used wherever intermediate times are needed."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    out = _ode_solve(psi, lams, t_end, tol, want_traj=True, n0=n_min)
    return out["t_grid"], out["traj"]


def monodromy_and_derivative_batch(psi: Potential, lams,
                                   tol: float = _DEFAULT_TOL):
    """(M(1), dM/dlam(1)) for a batch; the workhorse of spectral refinement."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    out = _cached_monodromy(psi, lams, tol, want_mdot=True)
    return out["M"], out["Mdot"]


def lambda_derivative_path(psi: Potential, lams, t_end: float = 1.0,
                           tol: float = _DEFAULT_TOL):
    """M and dM/dlam on the whole integration grid of [0, t_end].

    Returns (t_grid, traj, dtraj), shapes (n+1,), (n+1, B, 2, 2) twice.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    out = _ode_solve(psi, lams, t_end, tol, want_traj=True, want_mdot=True)
    return out["t_grid"], out["traj"], out["dtraj"]


def solve_inhomogeneous(psi: Potential, lam: complex, g, v0, t: float = 1.0,
                        tol: float = _DEFAULT_TOL, return_path: bool = False):
    """Solve f' = (R + V) f + g, f(0) = v0, by variation of constants:

        f(t) = M(t) (v0 + int_0^t M^{-1}(s) g(s) ds).

    g is a callable mapping an array of times to shape (2, m) (or (m, 2));
    returns f(t), or (t_grid, f_on_grid) when return_path is set.
    """
    v0 = np.asarray(v0, dtype=complex).reshape(2)
    t_grid, traj = trajectory(psi, [lam], t, tol)
    gv = np.asarray(g(t_grid), dtype=complex)
    if gv.shape == (t_grid.shape[0], 2):
        gv = gv.T
    if gv.shape != (2, t_grid.shape[0]):
        raise ValueError("g must return shape (2, m) for an array of m times")
    integrand = np.einsum("nij,jn->ni", adjugate(traj[:, 0]), gv)
    h = t_grid[1] - t_grid[0]
    cum = cumulative_integral(integrand, h)
    path = np.einsum("nij,nj->ni", traj[:, 0], v0[None, :] + cum)
    if return_path:
        return t_grid, path
    return path[-1]
