"""Dirichlet, Neumann, periodic and critical spectra of the monodromy matrix.

With M(1, lam) = [[m1, m2], [m3, m4]] the four spectra are the zero sets of

    dirichlet:  chi_D = (m4 + m3 - m2 - m1) / 2i      (= sin 2 lam^2 at psi=0)
    neumann:    chi_N = (m4 - m3 + m2 - m1) / 2i      (= sin 2 lam^2 at psi=0)
    periodic:   chi_P = Delta^2 - 4,  Delta = m1 + m4 (= -4 sin^2 2 lam^2)
    critical:   dDelta/dlam                           (= -8 lam sin 2 lam^2)

For large |n| the roots localize pairwise in discs D^i_n: the set
{ |2 lam^2 - |n| pi| < pi/4 } for i = 1 (component in the half plane
Re lam >< 0 by the sign of n) and { |2 lam^2 + |n| pi| < pi/4 } for i = 2
(component with Im lam >< 0), i.e. discs centred at

    center(i, n) = sgn(n) sqrt((-1)^(i-1) |n| pi / 2),

while the first few roots stay inside the ball B_N of radius
sqrt((N + 1/4) pi / 2).  Expected counts per component disc / per ball:

    dirichlet, neumann: 1 / 2(2N+1)
    periodic:           2 / 4(2N+1)
    critical:           1 / 4N+3

Roots are counted by the argument principle (accumulated phase of chi along
the contour), localized by recursive subdivision, seeded by contour moments
of log chi, polished by Newton iteration, and labeled by the lexicographic
order (real part, then imaginary part) described in the module functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fundsol
from .errors import ContourTooClose, CountMismatch, NonIntegerWinding, SignMismatch
from .potential import Potential

KINDS = ("dirichlet", "neumann", "periodic", "critical")

PER_DISC_COUNT = {"dirichlet": 1, "neumann": 1, "periodic": 2, "critical": 1}

_GUARD_RATIO = 1e-9
_DEFAULT_TOL = 1e-9
_DEFAULT_QUAD = 256
_MAX_QUAD = 8192
_NEWTON_MAX = 40


def _counting_tol(tol: float) -> float:
    """Solver tolerance for contour sampling: winding numbers and moment
    seeds only need a handful of phase digits, so counting runs looser than
    root refinement."""
    return max(min(1e-8, tol * 100.0), tol)


def ball_count(kind: str, N: int) -> int:
    """Expected number of roots (with multiplicity) inside B_N."""
    if kind in ("dirichlet", "neumann"):
        return 2 * (2 * N + 1)
    if kind == "periodic":
        return 4 * (2 * N + 1)
    if kind == "critical":
        return 4 * N + 3
    raise ValueError(f"unknown kind {kind!r}")


def zero_potential_eigenvalue(i: int, n: int) -> complex:
    """sgn(n) sqrt((-1)^(i-1) |n| pi / 2): the common zero-potential value of
    all four spectra."""
    if n == 0:
        return 0.0 + 0.0j
    base = abs(n) * np.pi / 2.0
    root = np.sqrt(base) if i == 1 else 1j * np.sqrt(base)
    return complex(np.sign(n) * root)


# ---------------------------------------------------------------------------
# spectral functions
# ---------------------------------------------------------------------------

def _chi_from_monodromy(kind: str, m: np.ndarray) -> np.ndarray:
    m1, m2, m3, m4 = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    if kind == "dirichlet":
        return (m4 + m3 - m2 - m1) / 2j
    if kind == "neumann":
        return (m4 - m3 + m2 - m1) / 2j
    if kind == "periodic":
        return (m1 + m4) ** 2 - 4.0
    raise ValueError(f"unknown kind {kind!r}")


def spectral_values(kind: str, psi: Potential, lams, tol: float = _DEFAULT_TOL):
    """chi_kind at a batch of lam values."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if kind == "critical":
        m, md = fundsol.monodromy_and_derivative_batch(psi, lams, tol)
        return md[..., 0, 0] + md[..., 1, 1]
    m = fundsol.monodromy_batch(psi, lams, tol=tol)
    return _chi_from_monodromy(kind, m)


def discriminant(psi: Potential, lam, tol: float = _DEFAULT_TOL):
    """Delta(lam) = tr M(1, lam)."""
    m = fundsol.monodromy_batch(psi, np.atleast_1d(np.asarray(lam, complex)), tol=tol)
    out = m[..., 0, 0] + m[..., 1, 1]
    return complex(out[0]) if np.ndim(lam) == 0 else out


def anti_discriminant(psi: Potential, lam, tol: float = _DEFAULT_TOL):
    """delta(lam) = m2 + m3 at t = 1."""
    m = fundsol.monodromy_batch(psi, np.atleast_1d(np.asarray(lam, complex)), tol=tol)
    out = m[..., 0, 1] + m[..., 1, 0]
    return complex(out[0]) if np.ndim(lam) == 0 else out


def discriminant_derivative(psi: Potential, lam, tol: float = _DEFAULT_TOL):
    """dDelta/dlam via the integral formula for dM/dlam."""
    lams = np.atleast_1d(np.asarray(lam, dtype=complex))
    _, md = fundsol.monodromy_and_derivative_batch(psi, lams, tol)
    out = md[..., 0, 0] + md[..., 1, 1]
    return complex(out[0]) if np.ndim(lam) == 0 else out


def characteristic(kind: str, psi: Potential, lam, tol: float = _DEFAULT_TOL):
    """The kind's characteristic function at lam (critical -> dDelta/dlam)."""
    out = spectral_values(kind, psi, np.atleast_1d(np.asarray(lam, complex)), tol)
    return complex(out[0]) if np.ndim(lam) == 0 else out


def _second_derivative_of_discriminant(psi, lams, tol, radius=None):
    """d^2 Delta / dlam^2 by a Cauchy circle applied to dDelta/dlam."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    m = 16
    if radius is None:
        radius = 0.02 * np.maximum(1.0, np.abs(lams))
    radius = np.broadcast_to(np.asarray(radius, dtype=float), lams.shape)
    phis = 2.0 * np.pi * np.arange(m) / m
    ring = lams[:, None] + radius[:, None] * np.exp(1j * phis)[None, :]
    vals = spectral_values("critical", psi, ring.ravel(), tol).reshape(ring.shape)
    return (vals * np.exp(-1j * phis)[None, :]).mean(axis=1) / radius


def spectral_values_and_derivatives(kind, psi, lams, tol=_DEFAULT_TOL):
    """(chi, dchi/dlam) for Newton refinement."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if kind == "critical":
        chi = spectral_values("critical", psi, lams, tol)
        return chi, _second_derivative_of_discriminant(psi, lams, tol)
    m, md = fundsol.monodromy_and_derivative_batch(psi, lams, tol)
    if kind == "periodic":
        delta = m[..., 0, 0] + m[..., 1, 1]
        ddelta = md[..., 0, 0] + md[..., 1, 1]
        return delta**2 - 4.0, 2.0 * delta * ddelta
    return _chi_from_monodromy(kind, m), _chi_from_monodromy(kind, md)


def _local_scale(kind: str, z: np.ndarray) -> np.ndarray:
    """Natural magnitude of chi_kind away from roots (used to normalise the
    root-on-contour guard on contours with a large dynamic range)."""
    w = np.exp(2.0 * np.abs((z**2).imag))
    if kind == "periodic":
        return w * w + 4.0
    if kind == "critical":
        return 8.0 * np.maximum(np.abs(z), 0.25) * w
    return 0.5 * w + 0.5


# ---------------------------------------------------------------------------
# localization regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscSpec:
    """A localization region: a component disc D^i_n, the central disc D_0,
    or a ball B_N, with a parametrized positively oriented boundary."""

    region: str  # "component", "center", "ball"
    i: int = 0
    n: int = 0
    N: int = 0

    @property
    def center(self) -> complex:
        if self.region == "component":
            return zero_potential_eigenvalue(self.i, self.n)
        return 0.0 + 0.0j

    @property
    def radius(self) -> float:
        """Radius (ball/center) or max distance from center (component)."""
        if self.region == "ball":
            return float(np.sqrt((self.N + 0.25) * np.pi / 2.0))
        if self.region == "center":
            return float(np.sqrt(np.pi / 8.0))
        w0 = abs(self.n) * np.pi
        return float(np.sqrt((w0 + np.pi / 4.0) / 2.0) - np.sqrt(w0 / 2.0))

    def contour(self, m: int, dilation: int = 0):
        """m boundary samples z(phi_k) and the velocities dz/dphi.

        Component discs are the image of the circle |w - w0| = pi/4 (dilated
        multiplicatively) under the half-plane branch of lam = sqrt(w/2);
        balls and the central disc are circles whose squared radius is dilated
        additively so neighbouring regions are never swallowed.
        """
        phis = 2.0 * np.pi * np.arange(m) / m
        e = np.exp(1j * phis)
        if self.region == "component":
            w0 = abs(self.n) * np.pi
            rw = (np.pi / 4.0) * 1.05**dilation
            w = w0 + rw * e
            if self.i == 1:
                z = np.sign(self.n) * np.sqrt(w / 2.0)
            else:
                z = np.sign(self.n) * 1j * np.sqrt(w / 2.0)
            dz = (1j * rw * e) / (4.0 * z) * (1.0 if self.i == 1 else -1.0)
            # dz/dphi = dlam/dw * dw/dphi; lam^2 = +-w/2 gives dlam/dw = +-1/(4 lam)
            return z, dz
        if self.region == "ball":
            rsq = (self.N + 0.25 + 0.1 * dilation) * np.pi / 2.0
        else:
            rsq = (0.25 + 0.1 * dilation) * np.pi / 2.0
        r = np.sqrt(rsq)
        z = r * e
        return z, 1j * z

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=complex)
        if self.region == "component":
            w0 = abs(self.n) * np.pi
            sign_ok = (
                np.sign(pts.real) == np.sign(self.n)
                if self.i == 1
                else np.sign(pts.imag) == np.sign(self.n)
            )
            wval = 2.0 * pts**2 * (1.0 if self.i == 1 else -1.0)
            return (np.abs(wval - w0) < np.pi / 4.0) & sign_ok
        return np.abs(pts) < self.radius

    def to_dict(self) -> dict:
        boundary, _ = self.contour(128)
        return {
            "region": self.region,
            "i": self.i,
            "n": self.n,
            "N": self.N,
            "center": [float(self.center.real), float(self.center.imag)],
            "boundary": [[float(z.real), float(z.imag)] for z in boundary],
        }


def disc_din(i: int, n: int) -> DiscSpec:
    if i not in (1, 2) or n == 0:
        raise ValueError("component discs need i in {1,2} and n != 0")
    return DiscSpec("component", i=i, n=n)


def disc_d0() -> DiscSpec:
    return DiscSpec("center")


def disc_bn(N: int) -> DiscSpec:
    if N < 0:
        raise ValueError("N must be >= 0")
    if N == 0:
        return disc_d0()
    return DiscSpec("ball", N=N)


# ---------------------------------------------------------------------------
# winding numbers and contour moments
# ---------------------------------------------------------------------------

def _phase_winding(chi: np.ndarray):
    """(winding, max jump) from accumulated principal-value phase increments
    along a closed sample loop; the sum is 2 pi * integer exactly."""
    rolled = np.roll(chi, -1)
    jumps = np.angle(rolled / chi)
    total = jumps.sum() / (2.0 * np.pi)
    w = int(np.rint(total))
    if abs(total - w) > 0.2:
        raise NonIntegerWinding(f"winding {total} is not close to an integer")
    return w, float(np.max(np.abs(jumps)))


def _unwrapped_log(chi: np.ndarray) -> np.ndarray:
    """log chi with the argument continued along the sample loop."""
    phase = np.concatenate([[np.angle(chi[0])],
                            np.angle(chi[1:] / chi[:-1])]).cumsum()
    return np.log(np.abs(chi)) + 1j * phase


def _moments_from_samples(z, dz, chi, winding, max_p=2):
    """Power sums s_p = sum of roots^p inside a smooth closed contour.

    Integration by parts of (1/2 pi i) oint z^p dlog(chi) gives

        s_p = (w / 2 pi) oint z^p dphi - (p / 2 pi i) oint z^(p-1) lt z' dphi,

    where lt is log chi minus the winding ramp i w phi; lt is periodic along
    the loop, so the trapezoid rule converges spectrally.
    """
    m = z.shape[0]
    phis = 2.0 * np.pi * np.arange(m) / m
    ell = _unwrapped_log(chi) - 1j * winding * phis
    sums = []
    for p in range(1, max_p + 1):
        term1 = winding * np.mean(z**p)
        term2 = (p / (2j * np.pi)) * (2.0 * np.pi) * np.mean(z ** (p - 1) * ell * dz)
        sums.append(term1 - term2)
    return sums


def _disc_winding(kind, psi, disc: DiscSpec, tol, quad_points=_DEFAULT_QUAD,
                  keep_samples=False):
    """Winding number of chi_kind around a disc boundary, with dilation
    retries when a root sits on the contour and sample doubling until the
    count stabilizes."""
    for dilation in range(4):
        m = max(64, quad_points // 2)
        prev = None
        guard_failed = False
        while m <= _MAX_QUAD:
            z, dz = disc.contour(m, dilation)
            chi = spectral_values(kind, psi, z, _counting_tol(tol))
            u = np.abs(chi) / _local_scale(kind, z)
            if u.min() < _GUARD_RATIO * max(u.max(), 1e-300):
                guard_failed = True
                break
            w, max_jump = _phase_winding(chi)
            # a generously resolved phase cannot alias; otherwise require two
            # consecutive densities to agree
            if max_jump < np.pi / 6.0 or (max_jump < 0.5 * np.pi and prev == w):
                if keep_samples:
                    return w, (z, dz, chi)
                return w, None
            prev = w if max_jump < 0.5 * np.pi else None
            m *= 2
        if not guard_failed:
            raise NonIntegerWinding(
                f"winding did not stabilize on {disc} at {_MAX_QUAD} samples"
            )
    raise ContourTooClose(f"root on the boundary of {disc} after 3 dilations")


def count_roots(kind, psi, disc: DiscSpec, quad_points: int = _DEFAULT_QUAD,
                tol: float = _DEFAULT_TOL) -> int:
    """Number of roots of chi_kind inside the disc, by the argument principle."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    w, _ = _disc_winding(kind, psi, disc, tol, quad_points)
    return w


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------

def _newton_polish(kind, psi, z0, tol, mult=None, max_iter=_NEWTON_MAX):
    """Multiplicity-aware Newton iteration on chi; returns (roots, residual)."""
    z = np.atleast_1d(np.asarray(z0, dtype=complex)).copy()
    if mult is None:
        mult = np.ones(z.shape, dtype=float)
    else:
        mult = np.asarray(mult, dtype=float)
    target = max(0.05 * tol, 1e-13)
    active = np.ones(z.shape, dtype=bool)
    for _ in range(max_iter):
        chi, dchi = spectral_values_and_derivatives(kind, psi, z[active], tol)
        bad = np.abs(dchi) < 1e-300
        dchi = np.where(bad, 1.0, dchi)
        step = np.where(bad, 0.0, mult[active] * chi / dchi)
        z[active] -= step
        still = np.abs(step) > target
        idx = np.nonzero(active)[0]
        active[idx[~still]] = False
        if not active.any():
            break
    chi_final = spectral_values(kind, psi, z, tol)
    return z, np.abs(chi_final)


def _refine_critical_point(psi, z0, tol):
    """Newton on dDelta/dlam (used both for critical points and for double
    periodic eigenvalues, which coincide with zeros of dDelta)."""
    return _newton_polish("critical", psi, z0, tol)


def _pair_from_moments(s1, s2):
    e2 = (s1 * s1 - s2) / 2.0
    disc = np.sqrt(s1 * s1 - 4.0 * e2)
    return (s1 + disc) / 2.0, (s1 - disc) / 2.0


def _roots_in_component_disc(kind, psi, disc, tol):
    """Refined roots (value, multiplicity, residual) inside one D^i_n."""
    expected = PER_DISC_COUNT[kind]
    w, samples = _disc_winding(kind, psi, disc, tol, keep_samples=True)
    if w != expected:
        raise CountMismatch(
            f"{kind}: expected {expected} roots in D^{disc.i}_{disc.n}, found {w}"
        )
    z, dz, chi = samples
    sep_cut = np.sqrt(tol)
    if kind != "periodic":
        (s1,) = _moments_from_samples(z, dz, chi, w, max_p=1)
        roots, res = _newton_polish(kind, psi, [s1], tol)
        return [(complex(roots[0]), 1, float(res[0]))]
    s1, s2 = _moments_from_samples(z, dz, chi, w, max_p=2)
    r1, r2 = _pair_from_moments(s1, s2)
    if abs(r1 - r2) < sep_cut:
        # a double periodic eigenvalue is a zero of dDelta: polish there
        half = 0.5 * s1
        zs, _ = _refine_critical_point(psi, [half], tol)
        val = complex(zs[0]) if abs(zs[0] - half) < 10 * sep_cut else complex(half)
        res = abs(characteristic("periodic", psi, val, tol))
        return [(val, 2, float(res))]
    roots, res = _newton_polish("periodic", psi, [r1, r2], tol)
    if abs(roots[0] - roots[1]) < sep_cut:  # Newton merged the pair
        half = 0.5 * (roots[0] + roots[1])
        res0 = abs(characteristic("periodic", psi, half, tol))
        return [(complex(half), 2, float(res0))]
    return [(complex(roots[0]), 1, float(res[0])),
            (complex(roots[1]), 1, float(res[1]))]


# rectangle contours for the subdivision stage --------------------------------

def _rect_contour(x0, x1, y0, y1, m_edge):
    """Closed positively oriented rectangle boundary as 4 edges of m_edge+1
    points each (corners duplicated edge-to-edge); returns the concatenated
    samples and per-edge slices."""
    tt = np.linspace(0.0, 1.0, m_edge + 1)
    e1 = x0 + (x1 - x0) * tt + 1j * y0
    e2 = x1 + 1j * (y0 + (y1 - y0) * tt)
    e3 = x1 + (x0 - x1) * tt + 1j * y1
    e4 = x0 + 1j * (y1 + (y0 - y1) * tt)
    return [e1, e2, e3, e4]


def _simpson_weights(m):
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _rect_winding_and_moments(kind, psi, box, tol, m_edge=48, max_p=2):
    """Winding and power sums on a rectangle.

    The log of chi is continued along the whole boundary; per edge,
    int z^(p-1) log(chi) dz is evaluated by composite Simpson (the boundary
    terms of the integration by parts telescope to 2 pi i w z0^p).  Returns
    None when a boundary sample violates the root-on-contour guard.
    """
    x0, x1, y0, y1 = box
    edges = _rect_contour(x0, x1, y0, y1, m_edge)
    allz = np.concatenate([e[:-1] for e in edges])
    chi = spectral_values(kind, psi, allz, _counting_tol(tol))
    u = np.abs(chi) / _local_scale(kind, allz)
    if u.min() < _GUARD_RATIO * max(u.max(), 1e-300):
        return None
    w, max_jump = _phase_winding(chi)
    if max_jump > 0.5 * np.pi:
        return None
    if w == 0:
        return w, []
    ell_open = _unwrapped_log(chi)
    # per-edge values including both endpoints; the closing value continues
    # the branch by the winding jump
    ell_edges = []
    for e_idx in range(4):
        lo = e_idx * m_edge
        hi = lo + m_edge
        if e_idx < 3:
            seg = np.concatenate([ell_open[lo : hi + 1]])
        else:
            closing = ell_open[0] + 2j * np.pi * w
            seg = np.concatenate([ell_open[lo:], [closing]])
        ell_edges.append(seg)
    sw = _simpson_weights(m_edge)
    sums = []
    z0 = edges[0][0]
    for p in range(1, max_p + 1):
        total = 0.0 + 0.0j
        for e, ell in zip(edges, ell_edges):
            dz = e[1] - e[0]
            total += np.sum(sw * e ** (p - 1) * ell) * dz
        sums.append(w * z0**p - (p / (2j * np.pi)) * total)
    return w, sums


def _verify_cluster(kind, psi, center, mult, rho):
    """Confirm that a circle of radius rho around `center` holds exactly
    `mult` roots.  Runs at a tight solver tolerance because chi is of size
    rho^mult there; used to certify 'cluster diameter < tol^(1/mult)'."""
    m = 128
    phis = 2.0 * np.pi * np.arange(m) / m
    for bump in (1.0, 1.25, 0.8):
        z = center + rho * bump * np.exp(1j * phis)
        chi = spectral_values(kind, psi, z, 1e-13)
        if np.min(np.abs(chi)) < 1e-300:
            continue
        try:
            w, max_jump = _phase_winding(chi)
        except NonIntegerWinding:
            continue
        if max_jump < 0.5 * np.pi:
            return w == mult
    return False


def _subdivide_roots(kind, psi, box, count, tol, depth=0, pre=None):
    """Recursive subdivision of a rectangle known to hold `count` roots.

    A cell whose roots separate is resolved by moment-seeded Newton; a cell
    suspected to hold one m-fold cluster is certified by counting the roots
    inside a circle of radius tol^(1/m)/2 around the candidate, which realises
    the 'cluster diameter below tol^(1/m)' rule without descending that deep.

    Simple roots are returned as unpolished seeds (residual None) so the
    caller can Newton-polish them all in one batch; each entry is
    (value, multiplicity, residual_or_None, cell_diameter).
    """
    x0, x1, y0, y1 = box
    diam = float(np.hypot(x1 - x0, y1 - y0))
    sep_cut = np.sqrt(tol)
    if count == 0:
        return []
    res = pre if pre is not None else _rect_winding_and_moments(kind, psi, box, tol)
    if res is not None and res[0] != count:
        res = None  # inconsistent sampling; fall through to split
    if res is not None:
        w, sums = res
        if w == 1:
            return [(complex(sums[0]), 1, None, diam)]
        cand = sums[0] / w
        if w == 2:
            r1, r2 = _pair_from_moments(sums[0], sums[1])
            roots, rr = _newton_polish(kind, psi, [r1, r2], tol)
            if (abs(roots[0] - roots[1]) >= sep_cut
                    and max(abs(roots[0] - cand), abs(roots[1] - cand))
                    <= 2.0 * diam):
                return [(complex(roots[0]), 1, float(rr[0]), diam),
                        (complex(roots[1]), 1, float(rr[1]), diam)]
            merged = 0.5 * (roots[0] + roots[1])
            if abs(merged - cand) <= 2.0 * diam:
                cand = merged
            if kind == "periodic":
                zs, _ = _refine_critical_point(psi, [cand], tol)
                if abs(zs[0] - cand) < 10.0 * sep_cut:
                    cand = complex(zs[0])
        rho = 0.5 * tol ** (1.0 / w)
        if _verify_cluster(kind, psi, cand, w, rho):
            rres = abs(characteristic(kind, psi, complex(cand), tol))
            return [(complex(cand), w, float(rres), diam)]
    if depth > 60:
        raise CountMismatch(f"subdivision failed to isolate roots in {box}")
    # split along the longer side, jittering when a root sits on the cut
    for frac in (0.5, 0.57, 0.43, 0.64, 0.36):
        if (x1 - x0) >= (y1 - y0):
            xm = x0 + frac * (x1 - x0)
            boxes = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        else:
            ym = y0 + frac * (y1 - y0)
            boxes = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
        pres = [_rect_winding_and_moments(kind, psi, bx, tol) for bx in boxes]
        if any(p is None for p in pres):
            continue
        if sum(p[0] for p in pres) != count:
            continue
        out = []
        for bx, p in zip(boxes, pres):
            out.extend(_subdivide_roots(kind, psi, bx, p[0], tol,
                                        depth + 1, pre=p))
        return out
    raise ContourTooClose(f"could not find a clean cut of {box}")


def _polish_multiple_roots(kind, psi, found, tol):
    """Re-extract every multiplicity >= 2 root on a circle around its seed.

    Rectangle moments seed cluster centroids to a few digits only (near the
    cluster the characteristic function is as small as noise^1, so relative
    noise is large).  A circle well inside the isolation distance restores
    spectral accuracy of the centroid s1/m; for double periodic eigenvalues a
    Newton iteration on dDelta (whose zero there is simple) does even better.
    """
    if all(m == 1 for _, m, _ in found):
        return found
    out = []
    values = [v for v, _, _ in found]
    for idx, (v, m, r) in enumerate(found):
        if m == 1:
            out.append((v, m, r))
            continue
        val = v
        polished = False
        if kind == "periodic" and m == 2:
            zs, _ = _refine_critical_point(psi, [val], tol)
            if abs(zs[0] - val) < 50.0 * np.sqrt(tol):
                val = complex(zs[0])
                polished = True
        if not polished:
            others = [u for j, u in enumerate(values) if j != idx]
            iso = min((abs(val - u) for u in others), default=1.0)
            radius = float(np.clip(0.25 * iso, 5e-3, 0.3))
            mloc = 128
            while mloc <= 1024:
                phis = 2.0 * np.pi * np.arange(mloc) / mloc
                z = val + radius * np.exp(1j * phis)
                dz = 1j * (z - val)
                chi = spectral_values(kind, psi, z, tol)
                u = np.abs(chi) / _local_scale(kind, z)
                if u.min() < _GUARD_RATIO * max(u.max(), 1e-300):
                    break
                w, max_jump = _phase_winding(chi)
                if max_jump >= 0.4 * np.pi:
                    mloc *= 2
                    continue
                if w == m:
                    (s1,) = _moments_from_samples(z, dz, chi, w, max_p=1)
                    val = complex(s1 / m)
                break
        res = abs(characteristic(kind, psi, val, tol))
        out.append((val, m, float(res)))
    return out


def _roots_in_ball(kind, psi, N, tol):
    """All roots inside B_N: ball count by circular contour, then subdivision
    of the bounding square with results filtered to |z| < radius."""
    disc = disc_bn(N)
    w, _ = _disc_winding(kind, psi, disc, tol)
    expected = ball_count(kind, N)
    if w != expected:
        raise CountMismatch(
            f"{kind}: B_{N} holds {w} roots, expected {expected}"
        )
    r = disc.radius
    pad = 0.02 * r
    box = (-r - pad, r + pad, -r - pad, r + pad)
    res = _rect_winding_and_moments(kind, psi, box, tol)
    if res is None:
        box = (-r - 2.3 * pad, r + 1.7 * pad, -r - 1.3 * pad, r + 2.7 * pad)
        res = _rect_winding_and_moments(kind, psi, box, tol)
        if res is None:
            raise ContourTooClose("bounding square of the ball is obstructed")
    total = res[0]
    raw = _subdivide_roots(kind, psi, box, total, tol, pre=res)
    # polish all simple-root seeds in one Newton batch
    seeds = [(k, v, d) for k, (v, m, rr, d) in enumerate(raw)
             if m == 1 and rr is None]
    found = [(v, m, rr) for v, m, rr, _ in raw]
    if seeds:
        zs, rres = _newton_polish(kind, psi, [s[1] for s in seeds], tol)
        for (k, seed, d), z, rr in zip(seeds, zs, rres):
            if abs(z - seed) <= 2.0 * d:
                found[k] = (complex(z), 1, float(rr))
            else:
                found[k] = (complex(seed), 1,
                            float(abs(characteristic(kind, psi, seed, tol))))
    found = _polish_multiple_roots(kind, psi, found, tol)
    inside = [fr for fr in found if abs(fr[0]) < r]
    got = sum(mult for _, mult, _ in inside)
    if got != expected:
        raise CountMismatch(
            f"{kind}: located {got} roots inside B_{N}, expected {expected}"
        )
    return inside


# ---------------------------------------------------------------------------
# batched counting over many component discs
# ---------------------------------------------------------------------------

def _component_counts(kind, psi, pairs, tol, m0=128):
    """Winding numbers for many component discs at once.

    All pending discs are sampled in a single batched evaluation per sweep;
    discs whose count is stable between two sample densities retire, the rest
    double their density.  Guard violations fall back to the per-disc routine
    (which handles contour dilation).  Returns ({pair: count},
    {pair: (z, dz, chi)}) with the samples of the accepted sweep.
    """
    state = {p: {"m": max(32, m0 // 2), "prev": None} for p in pairs}
    counts, samples = {}, {}
    while state:
        keys = list(state)
        contours = [disc_din(*p).contour(state[p]["m"]) for p in keys]
        lens = [c[0].shape[0] for c in contours]
        allz = np.concatenate([c[0] for c in contours])
        chi_all = spectral_values(kind, psi, allz, _counting_tol(tol))
        pos = 0
        for p, (z, dz), ln in zip(keys, contours, lens):
            chi = chi_all[pos : pos + ln]
            pos += ln
            st = state[p]
            u = np.abs(chi) / _local_scale(kind, z)
            if u.min() < _GUARD_RATIO * max(u.max(), 1e-300):
                w, smp = _disc_winding(kind, psi, disc_din(*p), tol,
                                       keep_samples=True)
                counts[p], samples[p] = w, smp
                del state[p]
                continue
            w, max_jump = _phase_winding(chi)
            if max_jump < np.pi / 6.0 or (max_jump < 0.5 * np.pi
                                          and st["prev"] == w):
                counts[p], samples[p] = w, (z, dz, chi)
                del state[p]
                continue
            st["prev"] = w if max_jump < 0.5 * np.pi else None
            st["m"] *= 2
            if st["m"] > _MAX_QUAD:
                raise NonIntegerWinding(f"winding unstable on D^{p[0]}_{p[1]}")
    return counts, samples


def _refine_outer_discs(kind, psi, pairs, samples, tol):
    """Refined roots for the component discs, Newton-polished in one batch.

    Returns {pair: [(value, mult, residual), ...]} with the periodic pairs
    collapsed to a double root when the two moment roots are closer than
    sqrt(tol).
    """
    sep_cut = np.sqrt(tol)
    seeds, owner = [], []
    doubles, downer = [], []
    for p in pairs:
        z, dz, chi = samples[p]
        w = PER_DISC_COUNT[kind]
        if kind != "periodic":
            (s1,) = _moments_from_samples(z, dz, chi, w, max_p=1)
            seeds.append(s1)
            owner.append(p)
            continue
        s1, s2 = _moments_from_samples(z, dz, chi, w, max_p=2)
        r1, r2 = _pair_from_moments(s1, s2)
        if abs(r1 - r2) < sep_cut:
            doubles.append(0.5 * s1)
            downer.append(p)
        else:
            seeds.extend([r1, r2])
            owner.extend([p, p])
    out = {p: [] for p in pairs}
    if seeds:
        roots, res = _newton_polish(kind, psi, seeds, tol)
        merged = {}
        for p, root, r in zip(owner, roots, res):
            merged.setdefault(p, []).append((complex(root), float(r)))
        for p, lst in merged.items():
            if len(lst) == 2 and abs(lst[0][0] - lst[1][0]) < sep_cut:
                doubles.append(0.5 * (lst[0][0] + lst[1][0]))
                downer.append(p)
            else:
                out[p].extend((v, 1, r) for v, r in lst)
    if doubles:
        zs, _ = _refine_critical_point(psi, doubles, tol)
        chis = np.abs(spectral_values(kind, psi, zs, tol))
        for p, z0, z, r in zip(downer, doubles, zs, chis):
            val = complex(z) if abs(z - z0) < 10 * np.sqrt(tol) else complex(z0)
            out[p].append((val, 2, float(r)))
    return out


# ---------------------------------------------------------------------------
# labeling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabeledEigenvalue:
    """A refined root with its spectral kind and label.

    `sign` is '+' or '-' for periodic eigenvalues and 'none' otherwise.  An
    m-fold root fills m consecutive label slots; each resulting entry carries
    the same value and the full multiplicity m.  The extra central critical
    root that has no (i, n) index of its own is emitted with i = 0.
    """

    value: complex
    kind: str
    i: int
    n: int
    sign: str
    multiplicity: int
    residual: float

    @property
    def label(self):
        return (self.i, self.n, self.sign)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "i": self.i,
            "n": self.n,
            "sign": self.sign,
            "value": [float(self.value.real), float(self.value.imag)],
            "mult": self.multiplicity,
            "residual": float(self.residual),
        }


def lex_key(values, snap=None):
    """Sort order of the lexicographic comparison (real part, then imaginary
    part), with real parts snapped so that conjugate pairs whose real parts
    agree only to roundoff compare as equal."""
    values = np.asarray(values, dtype=complex)
    if snap is None:
        snap = 1e-8 * max(1.0, float(np.max(np.abs(values), initial=1.0)))
    order = np.argsort(values.real, kind="stable")
    snapped = np.empty(values.shape[0])
    cur = 0.0
    for rank, idx in enumerate(order):
        re = values.real[idx]
        if rank == 0 or re - cur > snap:
            cur = re
        snapped[idx] = cur
    return np.lexsort((values.imag, snapped))


def _expand_with_multiplicity(found, snap=None):
    """[(value, mult, res)] -> parallel arrays with each root repeated mult
    times, sorted lexicographically."""
    vals, mults, ress = [], [], []
    for v, m, r in found:
        vals.extend([v] * m)
        mults.extend([m] * m)
        ress.extend([r] * m)
    vals = np.asarray(vals, dtype=complex)
    idx = lex_key(vals, snap=snap)
    return vals[idx], np.asarray(mults)[idx], np.asarray(ress)[idx]


def _center_slots(kind: str, N: int):
    """Label slots of the ball block, in lexicographic assignment order."""
    slots = []
    if kind == "periodic":
        for n in range(-N, 0):
            slots += [(1, n, "-"), (1, n, "+")]
        for n in range(-N, 0):
            slots += [(2, n, "-"), (2, n, "+")]
        slots += [(1, 0, "-"), (1, 0, "+"), (2, 0, "-"), (2, 0, "+")]
        for n in range(1, N + 1):
            slots += [(2, n, "-"), (2, n, "+")]
        for n in range(1, N + 1):
            slots += [(1, n, "-"), (1, n, "+")]
        return slots
    for n in range(-N, 0):
        slots.append((1, n, "none"))
    for n in range(-N, 0):
        slots.append((2, n, "none"))
    slots.append((1, 0, "none"))
    if kind == "critical":
        slots.append((0, 0, "none"))  # the extra near-origin root
    slots.append((2, 0, "none"))
    for n in range(1, N + 1):
        slots.append((2, n, "none"))
    for n in range(1, N + 1):
        slots.append((1, n, "none"))
    return slots


def _apply_center_convention(kind, slots, vals):
    """Reorder the four periodic n = 0 slots so that the axis-hugging pairs
    get the intuitive i: the pair closer to the real axis becomes (1, 0, -+),
    the pair closer to the imaginary axis (2, 0, -+).  Falls back to the
    plain lexicographic assignment when the four roots do not split 2 + 2."""
    if kind != "periodic":
        return vals
    idx = [k for k, s in enumerate(slots) if s[1] == 0]
    if len(idx) != 4:
        return vals
    block = [vals[k] for k in idx]
    realish = [v for v in block if abs(v.imag) <= abs(v.real)]
    imagish = [v for v in block if abs(v.imag) > abs(v.real)]
    if len(realish) != 2 or len(imagish) != 2:
        return vals
    realish = sorted(realish, key=lambda v: (v.real, v.imag))
    imagish = sorted(imagish, key=lambda v: (v.real, v.imag))
    vals = list(vals)
    # slot order is (1,0,-), (1,0,+), (2,0,-), (2,0,+)
    vals[idx[0]], vals[idx[1]] = realish[0], realish[1]
    vals[idx[2]], vals[idx[3]] = imagish[0], imagish[1]
    return vals


def _order_periodic_pair(roots):
    """Two refined roots of one disc ordered so the '-' label comes first."""
    if len(roots) == 1:  # a double root fills both slots
        return [roots[0], roots[0]]
    v = np.asarray([roots[0][0], roots[1][0]])
    idx = lex_key(v)
    return [roots[int(idx[0])], roots[int(idx[1])]]


# ---------------------------------------------------------------------------
# top-level spectrum API
# ---------------------------------------------------------------------------

def minimal_counting_index(kind, psi, n_max=8, N_max=16,
                           tol=_DEFAULT_TOL, _counts=None):
    """Smallest N <= N_max such that every component disc with N < |n| (up to
    the verified range) holds the expected root count and B_N holds its
    expected total."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    n_check = max(n_max, 3)
    if _counts is None:
        pairs = [(i, n) for i in (1, 2)
                 for n in range(-n_check, n_check + 1) if n != 0]
        _counts, _ = _component_counts(kind, psi, pairs, tol)
    expected = PER_DISC_COUNT[kind]
    bad = [abs(n) for (i, n), w in _counts.items() if w != expected]
    n_floor = max(bad) if bad else 0
    for N in range(max(1, n_floor), min(N_max, n_check) + 1):
        w, _ = _disc_winding(kind, psi, disc_bn(N), tol)
        if w == ball_count(kind, N):
            return N
    raise CountMismatch(
        f"{kind}: no admissible localization index N <= {min(N_max, n_check)}"
    )


def locate_spectrum(kind, psi, n_max=8, tol=_DEFAULT_TOL, N_max=16):
    """Locate, refine and label all roots with |n| <= n_max.

    Pipeline: (1) find the minimal ball index N via the counting argument;
    (2) refine the single root / root pair of each component disc with
    N < |n| <= n_max from contour moments plus Newton; (3) subdivide the ball
    B_N recursively and refine its roots; (4) assign labels: component-disc
    roots inherit their (i, n) directly, ball roots fill the lexicographic
    label sequence, with multiplicities occupying consecutive slots and the
    intuitive axis convention applied to the four periodic n = 0 slots.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    n_check = max(n_max, 3)
    pairs = [(i, n) for i in (1, 2)
             for n in range(-n_check, n_check + 1) if n != 0]
    counts, samples = _component_counts(kind, psi, pairs, tol)
    N = minimal_counting_index(kind, psi, n_max, N_max, tol, _counts=counts)
    outer_pairs = [(i, n) for (i, n) in pairs if N < abs(n) <= n_max]
    refined = _refine_outer_discs(kind, psi, outer_pairs, samples, tol)
    results = []
    for (i, n) in outer_pairs:
        roots = refined[(i, n)]
        if kind == "periodic":
            lo, hi = _order_periodic_pair(roots)
            results.append(LabeledEigenvalue(lo[0], kind, i, n, "-", lo[1], lo[2]))
            results.append(LabeledEigenvalue(hi[0], kind, i, n, "+", hi[1], hi[2]))
        else:
            v, m, r = roots[0]
            results.append(LabeledEigenvalue(v, kind, i, n, "none", m, r))
    ball_roots = _roots_in_ball(kind, psi, N, tol)
    # refined values carry noise up to the refinement scale; real parts that
    # close must not scramble the lexicographic slots
    vals, mults, ress = _expand_with_multiplicity(ball_roots,
                                                  snap=2.0 * np.sqrt(tol))
    slots = _center_slots(kind, N)
    if len(vals) != len(slots):
        raise CountMismatch(
            f"{kind}: {len(vals)} ball roots for {len(slots)} label slots"
        )
    vals = _apply_center_convention(kind, slots, list(vals))
    for (slot, v, m, r) in zip(slots, vals, mults, ress):
        if abs(slot[1]) > n_max:
            continue
        results.append(
            LabeledEigenvalue(complex(v), kind, slot[0], slot[1], slot[2],
                              int(m), float(r))
        )
    results.sort(key=lambda e: (e.n, e.i, e.sign))
    return results


def spectrum_by_label(eigs):
    """Index a locate_spectrum result by its (i, n, sign) labels."""
    return {e.label: e for e in eigs}


def verify_disc_identity(psi, mu, tol=_DEFAULT_TOL) -> float:
    """|Delta^2(mu) - 4 - delta^2(mu)| at a Dirichlet or Neumann eigenvalue."""
    lam = mu.value if isinstance(mu, LabeledEigenvalue) else complex(mu)
    m = fundsol.monodromy_batch(psi, [lam], tol=tol)[0]
    delta = m[0, 0] + m[1, 1]
    anti = m[0, 1] + m[1, 0]
    return float(abs(delta**2 - 4.0 - anti**2))


def sign_at_periodic(psi, eig: LabeledEigenvalue, tol=_DEFAULT_TOL,
                     check_tol=1e-6):
    """Discriminant value at a periodic eigenvalue, checked against the parity
    law Delta = 2 (-1)^n; returns (signed value, residual)."""
    expected = 2.0 * (-1.0) ** eig.n
    val = discriminant(psi, eig.value, tol)
    residual = abs(val - expected)
    if residual > check_tol:
        raise SignMismatch(
            f"Delta({eig.value}) = {val}, expected {expected} for n = {eig.n}"
        )
    return expected, float(residual)
