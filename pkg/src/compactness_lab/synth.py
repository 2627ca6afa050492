"""Seeded synthetic fields and families used by the diagnostics and demos.

Velocities come from corner-sampled stream functions, so discrete divergence is
an exact stencil zero.  All randomness flows through a counter-based generator
keyed by an explicit seed.
"""

from __future__ import annotations

import numpy as np

from .divfree import VectorStepSeries
from .grid import ScalarField, StaggeredVectorField
from .parabolic import StepTimeSeries


def generator(seed):
    return np.random.default_rng(np.random.Philox(int(seed)))


def bump(rho):
    """The standard compactly supported bump exp(-1/(1-rho^2)) on |rho| < 1."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    inside = np.abs(rho) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - rho[inside] ** 2))
    return out


def random_smooth_field(grid, rng, modes=4, amplitude=1.0, mask=None):
    """Low-order random trigonometric polynomial on the box."""
    pts = grid.cell_centers().reshape(-1, grid.dim)
    out = np.zeros(len(pts))
    for _ in range(modes):
        kvec = rng.integers(0, 4, size=grid.dim)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.normal() * amplitude
        arg = sum(2.0 * np.pi * kvec[a] * pts[:, a] / grid.extent[a] for a in range(grid.dim))
        out += amp * np.cos(arg + phase)
    return ScalarField(grid, out.reshape(grid.shape), mask=mask)


def mean_zero(f):
    inside = f.mask.inside if f.mask is not None else np.ones(f.grid.shape, bool)
    m = float(f.values[inside].mean()) if inside.any() else 0.0
    vals = np.where(inside, f.values - m, 0.0)
    return ScalarField(f.grid, vals, mask=f.mask)


# ---------------------------------------------------------------------------
# stream functions and exact-div-free velocities (2D)


def curl_velocity(grid, psi_corners, mask=None):
    """MAC curl of a corner stream function: u = (d psi/dy, -d psi/dx)."""
    hx, hy = grid.spacing
    ux = (psi_corners[:, 1:] - psi_corners[:, :-1]) / hy
    uy = -(psi_corners[1:, :] - psi_corners[:-1, :]) / hx
    return StaggeredVectorField(grid, (ux, uy), mask=mask)


def stream_from_function(grid, fn):
    corners = grid.corner_coords().reshape(-1, grid.dim)
    return np.asarray(fn(corners), dtype=float).reshape([n + 1 for n in grid.shape])


def random_stream_velocity(grid, rng, modes=4, amplitude=1.0):
    def fn(pts):
        out = np.zeros(len(pts))
        for _ in range(modes):
            kvec = rng.integers(1, 4, size=grid.dim)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.normal() * amplitude
            arg = sum(2.0 * np.pi * kvec[a] * pts[:, a] / grid.extent[a] for a in range(grid.dim))
            out += amp * np.sin(arg + phase)
        return out

    return curl_velocity(grid, stream_from_function(grid, fn))


def disk_bump_velocity(grid, center, radius, amplitude=1.0, modulation=None):
    """Velocity given by a bump stream supported in the disk of the given
    radius; optional smooth scalar modulation of the stream."""
    c = np.asarray(center, dtype=float)

    def fn(pts):
        rho = np.linalg.norm(pts - c, axis=1) / radius
        out = amplitude * bump(rho)
        if modulation is not None:
            out = out * modulation(pts)
        return out

    return curl_velocity(grid, stream_from_function(grid, fn))


# ---------------------------------------------------------------------------
# families for the probes


def perturbation_scalar_family(base, pert, interval, n_slices, n_members):
    """f_n = base + pert/n, constant in time (the Cauchy-in-n model family)."""
    out = []
    for n in range(1, n_members + 1):
        f = base + (1.0 / n) * pert
        out.append(StepTimeSeries(interval, (f,) * n_slices))
    return out


def oscillating_scalar_family(g, interval, n_slices, osc_list):
    """f_n = sin(2 pi n t) g(x) sampled at slice midpoints on a shared partition."""
    a, b = interval
    mids = a + (np.arange(n_slices) + 0.5) * (b - a) / n_slices
    out = []
    for n in osc_list:
        coefs = np.sin(2.0 * np.pi * n * (mids - a) / (b - a))
        fields = tuple(g * float(c) for c in coefs)
        out.append(StepTimeSeries(interval, fields))
    return out


def boundary_bump_family(domain, interval, n_slices, n_members, scale=0.25):
    """Members of unit L^2 mass concentrating at distance scale/n from the
    boundary (width scale/2n): the peel norms of this family do not decay
    uniformly, the adversarial case for the local-to-global step."""
    from .grid import lp_norm

    g = domain.grid
    sd = domain.signed_distance
    out = []
    for n in range(1, n_members + 1):
        dist = scale / n
        width = max(scale / (2.0 * n), 2.0 * max(g.spacing))
        vals = bump((sd - dist) / width)
        f = ScalarField(g, vals, mask=domain)
        nrm = lp_norm(f, 2)
        if nrm > 0:
            f = f * (1.0 / nrm)
        out.append(StepTimeSeries(interval, (f,) * n_slices))
    return out


def translating_disk_ns_family(grid, interval, n_slices, n_members, center,
                               disk_radius, velocity, stream_fraction=0.7,
                               amplitude=1.0):
    """Convergent moving-domain family: u_n = curl of a bump stream riding the
    translating disk, plus an O(1/n) smooth perturbation; div-free, zero normal
    trace well inside every slice."""
    a, b = interval
    mids = a + (np.arange(n_slices) + 0.5) * (b - a) / n_slices
    c0 = np.asarray(center, dtype=float)
    v = np.asarray(velocity, dtype=float)
    members = []
    for n in range(1, n_members + 1):
        fields = []
        for t in mids:
            c = c0 + t * v

            def modulation(pts, n=n):
                return 1.0 + np.cos(2.0 * np.pi * pts[:, 0] / grid.extent[0]) / n

            fields.append(disk_bump_velocity(grid, c, stream_fraction * disk_radius,
                                             amplitude=amplitude, modulation=modulation))
        members.append(VectorStepSeries(interval, tuple(fields)))
    return members


def oscillating_ns_family(grid, interval, n_slices, osc_list, center, disk_radius,
                          stream_fraction=0.7, amplitude=1.0):
    """Adversarial family u_n = sin(2 pi n t) curl(psi)(x) on a static domain,
    sampled at slice midpoints on a shared partition."""
    a, b = interval
    mids = a + (np.arange(n_slices) + 0.5) * (b - a) / n_slices
    u0 = disk_bump_velocity(grid, center, stream_fraction * disk_radius, amplitude)
    members = []
    for n in osc_list:
        coefs = np.sin(2.0 * np.pi * n * (mids - a) / (b - a))
        members.append(VectorStepSeries(interval, tuple(u0 * float(c) for c in coefs)))
    return members
