"""Diffeomorphism families, non-cylindrical domains, epsilon-interior geometry,
and the uniform constants (Jacobian bounds, bilipschitz frame, Poincare and
Sobolev transport) that the moving-domain compactness argument consumes.

All set identities are raster statements: erosion/dilation recompute an exact
Euclidean distance transform on the membership raster and are asserted up to a
one-cell band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.ndimage
import scipy.sparse.linalg

from .grid import (RasterDomain, neumann_laplacian,
                   signed_distance_transform)

TIME_SAMPLES_PER_UNIT = 64


# ---------------------------------------------------------------------------
# raster geometry


def eps_interior(d, eps):
    """Cells of d at raster distance > eps from the complement (exact EDT)."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0.0:
        return d
    sd = signed_distance_transform(d.grid, d.inside)
    return RasterDomain.from_membership(d.grid, sd > eps)


def eps_exterior(d, eps):
    """d dilated by a (closed) ball of radius eps on the raster."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0.0:
        return d
    sd = signed_distance_transform(d.grid, d.inside)
    return RasterDomain.from_membership(d.grid, sd >= -eps)


def symmetric_difference_band(d1, d2, reference_sd, level, band_cells=2.0):
    """Count symmetric-difference cells lying deeper than `band_cells` cells
    away from the {reference_sd = level} contour."""
    sym = d1.inside ^ d2.inside
    band = band_cells * max(d1.grid.spacing)
    return int(np.count_nonzero(sym & (np.abs(reference_sd - level) > band)))


# ---------------------------------------------------------------------------
# domain presets (analytic signed distances are exact Euclidean)


def make_domain(name, grid, center=None):
    """Presets: `disk:r`, `square:L`, `annulus:r0:r1`, `full`; centered in the box
    unless `center` is given."""
    c = np.array([e / 2 for e in grid.extent]) if center is None else np.asarray(center, dtype=float)
    if name == "full":
        return RasterDomain.full(grid)
    parts = name.split(":")
    kind = parts[0]
    if kind == "disk":
        r = float(parts[1])

        def sdf(pts):
            return r - np.linalg.norm(pts - c, axis=1)

        return RasterDomain.from_sdf(grid, sdf)
    if kind == "square":
        L = float(parts[1])
        half = L / 2.0

        def sdf(pts):
            q = np.abs(pts - c) - half
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(np.max(q, axis=1), 0.0)
            return -(outside + inside)

        return RasterDomain.from_sdf(grid, sdf)
    if kind == "annulus":
        r0, r1 = float(parts[1]), float(parts[2])

        def sdf(pts):
            rho = np.linalg.norm(pts - c, axis=1)
            return np.minimum(rho - r0, r1 - rho)

        return RasterDomain.from_sdf(grid, sdf)
    raise ValueError(f"unknown domain preset {name!r}")


# ---------------------------------------------------------------------------
# diffeomorphism families


@dataclass(frozen=True, eq=False)
class DiffeoFamily:
    """Closed-form family A_t with gradient and inverse evaluators.

    forward/inverse: (t, pts (n,d)) -> (n,d); grad: (t, pts) -> (n,d,d).
    """

    interval: tuple
    kind: str
    forward: object
    grad: object
    inverse: object

    def times(self, per_unit=TIME_SAMPLES_PER_UNIT):
        a, b = self.interval
        n = max(2, int(np.ceil((b - a) * per_unit)) + 1)
        return np.linspace(a, b, n)

    def check_inverse(self, pts, times=None, tol=1e-9):
        times = self.times() if times is None else times
        worst = 0.0
        for t in times:
            back = self.forward(t, self.inverse(t, pts))
            worst = max(worst, float(np.max(np.linalg.norm(back - pts, axis=1))))
        if worst > tol:
            raise ValueError(f"inverse inconsistency {worst:.3e} exceeds {tol:g}")
        return worst

    def grad_continuity_modulus(self, pts, n_times=32):
        """Sampled sup |grad(t+dt) - grad(t)| at two time resolutions; both
        shrink for a family continuous in time."""
        out = []
        for n in (n_times, 2 * n_times):
            tt = np.linspace(self.interval[0], self.interval[1], n + 1)
            worst = 0.0
            prev = self.grad(tt[0], pts)
            for t in tt[1:]:
                cur = self.grad(t, pts)
                worst = max(worst, float(np.max(np.abs(cur - prev))))
                prev = cur
            out.append(worst)
        return tuple(out)


def make_family(name, interval, **params):
    """Presets: identity | translation (velocity) | rotation (omega, center) |
    dilation (amplitude, freq, center) | shear (amplitude)."""
    a, b = float(interval[0]), float(interval[1])
    dim = int(params.get("dim", 2))
    eye = np.eye(dim)

    if name == "identity":
        return DiffeoFamily(
            (a, b), "identity",
            forward=lambda t, p: np.array(p, dtype=float),
            grad=lambda t, p: np.broadcast_to(eye, (len(p), dim, dim)).copy(),
            inverse=lambda t, p: np.array(p, dtype=float),
        )
    if name == "translation":
        v = np.asarray(params["velocity"], dtype=float)
        return DiffeoFamily(
            (a, b), "translation",
            forward=lambda t, p: np.asarray(p, dtype=float) + t * v,
            grad=lambda t, p: np.broadcast_to(eye, (len(p), dim, dim)).copy(),
            inverse=lambda t, p: np.asarray(p, dtype=float) - t * v,
        )
    if name == "rotation":
        omega = float(params.get("omega", 1.0))
        c = np.asarray(params["center"], dtype=float)

        def rot(t):
            th = omega * t
            return np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])

        return DiffeoFamily(
            (a, b), "rotation",
            forward=lambda t, p: c + (np.asarray(p, dtype=float) - c) @ rot(t).T,
            grad=lambda t, p: np.broadcast_to(rot(t), (len(p), 2, 2)).copy(),
            inverse=lambda t, p: c + (np.asarray(p, dtype=float) - c) @ rot(t),
        )
    if name == "dilation":
        amp = float(params.get("amplitude", 0.25))
        freq = float(params.get("freq", 1.0))
        c = np.asarray(params["center"], dtype=float)

        def scale(t):
            return 1.0 + amp * np.sin(freq * t)

        return DiffeoFamily(
            (a, b), "dilation",
            forward=lambda t, p: c + scale(t) * (np.asarray(p, dtype=float) - c),
            grad=lambda t, p: np.broadcast_to(scale(t) * eye, (len(p), dim, dim)).copy(),
            inverse=lambda t, p: c + (np.asarray(p, dtype=float) - c) / scale(t),
        )
    if name == "shear":
        amp = float(params.get("amplitude", 0.2))

        def mat(t):
            return np.array([[1.0, amp * np.sin(t)], [0.0, 1.0]])

        def imat(t):
            return np.array([[1.0, -amp * np.sin(t)], [0.0, 1.0]])

        return DiffeoFamily(
            (a, b), "shear",
            forward=lambda t, p: np.asarray(p, dtype=float) @ mat(t).T,
            grad=lambda t, p: np.broadcast_to(mat(t), (len(p), 2, 2)).copy(),
            inverse=lambda t, p: np.asarray(p, dtype=float) @ imat(t).T,
        )
    raise ValueError(f"unknown family preset {name!r}")


# ---------------------------------------------------------------------------
# uniform constants of the motion


@dataclass(frozen=True)
class JacobianBounds:
    alpha: float
    beta: float
    raw_min: float = None
    raw_max: float = None

    def __post_init__(self):
        if not (0 < self.alpha <= self.beta):
            raise ValueError("need 0 < alpha <= beta")


SAFETY_SHRINK = 0.99
SAFETY_INFLATE = 1.01


def jacobian_bounds(family, domain, time_samples=None, max_points=2048):
    """Min/max of |det grad A_t| over a (t, x) sample lattice, with the declared
    0.99/1.01 safety factors."""
    pts = _sample_points(domain, max_points)
    times = family.times() if time_samples is None else time_samples
    lo, hi = np.inf, -np.inf
    for t in times:
        G = family.grad(t, pts)
        det = np.abs(np.linalg.det(G))
        lo = min(lo, float(det.min()))
        hi = max(hi, float(det.max()))
    return JacobianBounds(alpha=SAFETY_SHRINK * lo, beta=SAFETY_INFLATE * hi,
                          raw_min=lo, raw_max=hi)


@dataclass(frozen=True)
class BilipschitzInfo:
    K: float
    eta: float


def bilipschitz(family, domain, n_pairs=400, seed=7, time_samples=None):
    """Two-sided Lipschitz constant from sampled pairwise ratios; eta = 1/K."""
    rng = np.random.default_rng(np.random.Philox(seed))
    pts = _sample_points(domain, 4096)
    idx = rng.integers(0, len(pts), size=(n_pairs, 2))
    keep = idx[:, 0] != idx[:, 1]
    p, q = pts[idx[keep, 0]], pts[idx[keep, 1]]
    base = np.linalg.norm(p - q, axis=1)
    times = family.times() if time_samples is None else time_samples
    hi, lo = 1.0, 1.0
    for t in times:
        ratio = np.linalg.norm(family.forward(t, p) - family.forward(t, q), axis=1) / base
        hi = max(hi, float(ratio.max()))
        lo = min(lo, float(ratio.min()))
    K = max(hi, 1.0 / lo)
    return BilipschitzInfo(K=K, eta=1.0 / K)


def grad_sup_norm(family, domain, time_samples=None, max_points=2048):
    """Sampled sup over (t,x) of the spectral norm of grad A_t."""
    pts = _sample_points(domain, max_points)
    times = family.times() if time_samples is None else time_samples
    worst = 0.0
    for t in times:
        G = family.grad(t, pts)
        s = np.linalg.svd(G, compute_uv=False)
        worst = max(worst, float(s.max()))
    return worst


def _sample_points(domain, max_points):
    pts = domain.grid.cell_centers().reshape(-1, domain.grid.dim)[domain.inside.reshape(-1)]
    if len(pts) > max_points:
        stride = int(np.ceil(len(pts) / max_points))
        pts = pts[::stride]
    return pts


# ---------------------------------------------------------------------------
# the moving domain


class NonCylindricalDomain:
    """Time-sliced rasters of Omega^t = A_t(Omega) on a shared grid.

    Slice k represents the interval (t_k, t_{k+1}) and is rasterized at the
    interval midpoint.  Transported erosions A_t(Omega_eps) and slice
    inflations (Omega^t)_{-eps} are cached per (slice, eps).
    """

    def __init__(self, family, reference, n_slices):
        self.family = family
        self.reference = reference
        self.grid = reference.grid
        self.n_slices = int(n_slices)
        self.interval = family.interval
        self._eroded = {}
        self._slices = {}
        self._transported = {}
        self._exterior = {}

    @property
    def delta(self):
        a, b = self.interval
        return (b - a) / self.n_slices

    def slice_times(self):
        a, _ = self.interval
        return a + (np.arange(self.n_slices) + 0.5) * self.delta

    def eroded_reference(self, eps):
        key = round(float(eps), 12)
        if key not in self._eroded:
            self._eroded[key] = eps_interior(self.reference, eps)
        return self._eroded[key]

    def slice_raster(self, k):
        if k not in self._slices:
            self._slices[k] = self.transported(k, 0.0)
        return self._slices[k]

    def transported(self, k, eps):
        """Raster of A_{t_k}(Omega_eps)."""
        key = (k, round(float(eps), 12))
        if key not in self._transported:
            t = self.slice_times()[k]
            base = self.eroded_reference(eps) if eps > 0 else self.reference
            centers = self.grid.cell_centers().reshape(-1, self.grid.dim)
            pulled = self.family.inverse(t, centers)
            member = base.sd_at(pulled) > 0
            self._transported[key] = RasterDomain.from_membership(
                self.grid, member.reshape(self.grid.shape))
        return self._transported[key]

    def slice_exterior(self, k, eps):
        """Raster of (Omega^t_k) dilated by eps."""
        key = (k, round(float(eps), 12))
        if key not in self._exterior:
            self._exterior[key] = eps_exterior(self.slice_raster(k), eps)
        return self._exterior[key]

    def check_slice_consistency(self, band_cells=1.0):
        """Slice rasters must match the image rasters within one cell Hausdorff
        (they are built as image rasters, so this checks the cache wiring)."""
        band = band_cells * max(self.grid.spacing)
        for k in range(self.n_slices):
            r = self.slice_raster(k)
            again = self.transported(k, 0.0)
            if np.any(r.inside ^ again.inside):
                return False
            if abs(r.measure - again.measure) > band:
                return False
        return True


@dataclass
class FramingReport:
    eta: float
    eps: float
    inner_violations: int
    outer_violations: int
    inner_violations_banded: int
    outer_violations_banded: int

    @property
    def ok(self):
        return self.inner_violations_banded == 0 and self.outer_violations_banded == 0


def framing_check(family, domain, eps, n_slices=None, info=None, band_cells=1.5):
    """Rasterized check of (Omega^t)_{eps/eta} subset A_t(Omega_eps) subset
    (Omega^t)_{eta*eps) at every time sample; violations past a one-cell band
    must be zero."""
    info = bilipschitz(family, domain) if info is None else info
    eta = info.eta
    a, b = family.interval
    n = n_slices or max(2, int(np.ceil((b - a) * TIME_SAMPLES_PER_UNIT)))
    nc = NonCylindricalDomain(family, domain, n)
    band = band_cells * max(domain.grid.spacing)
    raw_in = raw_out = band_in = band_out = 0
    for k in range(n):
        slice_r = nc.slice_raster(k)
        mid = nc.transported(k, eps)
        inner = eps_interior(slice_r, eps / eta)
        outer = eps_interior(slice_r, eta * eps)
        sd_mid = signed_distance_transform(domain.grid, mid.inside)
        sd_out = signed_distance_transform(domain.grid, outer.inside)
        viol1 = inner.inside & ~mid.inside
        viol2 = mid.inside & ~outer.inside
        raw_in += int(np.count_nonzero(viol1))
        raw_out += int(np.count_nonzero(viol2))
        band_in += int(np.count_nonzero(viol1 & (sd_mid < -band)))
        band_out += int(np.count_nonzero(viol2 & (sd_out < -band)))
    return FramingReport(eta, eps, raw_in, raw_out, band_in, band_out)


@dataclass
class PeelReport:
    measured_sup: float
    bound: float
    tolerance: float = 0.02

    @property
    def ok(self):
        return self.measured_sup <= self.bound * (1.0 + self.tolerance)


def peel_measure(nc, eps, jb=None):
    """sup_t of the rasterized measure of Omega^t minus A_t(Omega_eps), against
    the transport bound beta * mu(Omega minus Omega_eps)."""
    if eps == 0.0:
        return PeelReport(0.0, 0.0)
    jb = jacobian_bounds(nc.family, nc.reference) if jb is None else jb
    worst = 0.0
    for k in range(nc.n_slices):
        full = nc.slice_raster(k)
        inner = nc.transported(k, eps)
        peel = full.inside & ~inner.inside
        worst = max(worst, float(np.count_nonzero(peel)) * nc.grid.cell_volume)
    ref_peel = (nc.reference.measure - nc.eroded_reference(eps).measure)
    return PeelReport(worst, jb.beta * ref_peel)


# ---------------------------------------------------------------------------
# Poincare constants


POINCARE_DENSE_LIMIT = 2000


def poincare_constant(domain, tol=1e-9, zero_rel_tol=1e-8):
    """1/sqrt(lambda_1) with lambda_1 the smallest nonzero Neumann eigenvalue on
    the raster (dense solve when small, else shift-invert Lanczos on the
    mean-zero subspace).  Disconnected rasters raise."""
    if domain.n_inside < 2:
        raise ValueError("domain too small for a Poincare constant")
    L, _ = neumann_laplacian(domain)
    n = L.shape[0]
    scale = float(L.diagonal().max())
    zero_tol = zero_rel_tol * scale
    if n <= POINCARE_DENSE_LIMIT:
        lam = scipy.linalg.eigh(L.toarray(), eigvals_only=True, subset_by_index=(0, min(3, n - 1)))
    else:
        v0 = np.ones(n)
        sigma = -1e-3 * scale
        lam, _ = scipy.sparse.linalg.eigsh(L, k=4, sigma=sigma, which="LM", tol=0, v0=v0)
        lam = np.sort(lam)
    positive = [x for x in lam if x > zero_tol]
    n_zero = len(lam) - len(positive)
    if n_zero != 1 or not positive:
        raise ValueError(
            f"no spectral gap at zero ({n_zero} numerical kernel vectors): disconnected raster?")
    return 1.0 / float(np.sqrt(positive[0]))


@dataclass
class PoincareSweep:
    eps_list: tuple
    constants: tuple

    @property
    def c_max(self):
        return max(self.constants)

    @property
    def spread(self):
        return max(self.constants) / min(self.constants)


def uniform_poincare_sweep(domain, eps_list):
    """Poincare constants of the eps-interiors; the max is the empirical common
    constant over the sweep."""
    consts = tuple(poincare_constant(eps_interior(domain, e)) for e in eps_list)
    return PoincareSweep(tuple(eps_list), consts)


def transported_poincare(family, domain, gamma, eps_list=None, jb=None):
    """Closed-form transported constant sqrt(beta/alpha) * C_{Omega,gamma} *
    sup|grad A_t| from the measured ingredients (raw sampled Jacobian extremes,
    so the identity family reproduces C_{Omega,gamma} exactly)."""
    if eps_list is None:
        eps_list = (0.0, gamma / 4, gamma / 2)
    sweep = uniform_poincare_sweep(domain, eps_list)
    jb = jacobian_bounds(family, domain) if jb is None else jb
    alpha = jb.raw_min if jb.raw_min is not None else jb.alpha
    beta = jb.raw_max if jb.raw_max is not None else jb.beta
    sup_grad = grad_sup_norm(family, domain)
    return float(np.sqrt(beta / alpha) * sweep.c_max * sup_grad)


# ---------------------------------------------------------------------------
# Sobolev transport


def sobolev_embedding_exponent(p, dim):
    """p* = dim p/(dim - p) below the critical exponent, else the p+1 surrogate."""
    if p < dim:
        return dim * p / (dim - p)
    return p + 1.0


def measure_sobolev_constant(domain, p, n_fields=40, seed=11, modes=4):
    """Rayleigh-quotient estimate of the reference Sobolev constant
    sup ||v||_{p*} / ||v||_{W^{1,p}} over a seeded random smooth family."""
    from .grid import gradient, lp_norm, ScalarField

    rng = np.random.default_rng(np.random.Philox(seed))
    g = domain.grid
    ps = sobolev_embedding_exponent(p, g.dim)
    pts = g.cell_centers().reshape(-1, g.dim)
    best = 0.0
    vol = g.cell_volume
    for _ in range(n_fields):
        vals = _random_trig(pts, g.extent, rng, modes).reshape(g.shape)
        f = ScalarField(g, vals, mask=domain)
        grad = gradient(f)
        gp = sum(np.sum(np.abs(c) ** p) for c in grad.components) * vol
        w1p = (lp_norm(f, p) ** p + gp) ** (1.0 / p)
        if w1p > 0:
            best = max(best, lp_norm(f, ps) / w1p)
    return best


def _random_trig(pts, extent, rng, modes):
    out = np.zeros(len(pts))
    dim = pts.shape[1]
    for _ in range(modes):
        kvec = rng.integers(0, 4, size=dim)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal()
        arg = sum(2 * np.pi * kvec[a] * pts[:, a] / extent[a] for a in range(dim))
        out += amp * np.cos(arg + phase)
    return out


def sobolev_transport_constant(p, family, domain, s_ref=None, jb=None):
    """K_p = S_Omega * beta^{1/p*} * alpha^{-1/p} with the raw measured
    Jacobian extremes; S_Omega declared or measured as a fallback."""
    jb = jacobian_bounds(family, domain) if jb is None else jb
    if s_ref is None:
        s_ref = measure_sobolev_constant(domain, p)
    alpha = jb.raw_min if jb.raw_min is not None else jb.alpha
    beta = jb.raw_max if jb.raw_max is not None else jb.beta
    ps = sobolev_embedding_exponent(p, domain.grid.dim)
    return float(s_ref * beta ** (1.0 / ps) * alpha ** (-1.0 / p))
