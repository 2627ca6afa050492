"""Space-only mollifiers, shift operators, and the product commutator
a (b * phi_k) - (a b) * phi_k whose uniform L^1 decay drives the product-limit
argument.

Kernels are the standard bump exp(-1/(1-|kx|^2)) rasterized on the grid lattice
and renormalized to discrete mass one.  Convolution is direct summation over
the kernel footprint with zero extension (no FFT), so masked semantics stay
exact and summation order is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from .grid import ScalarField
from .parabolic import StepTimeSeries, shift_series_steps


@dataclass(frozen=True, eq=False)
class Mollifier:
    """Rasterized bump of radius 1/k with discrete integral exactly one."""

    k: int
    grid: object
    weights: np.ndarray  # footprint box, zero outside the support ball

    @property
    def radius(self):
        return 1.0 / self.k

    def discrete_integral(self):
        return float(np.sum(self.weights) * self.grid.cell_volume)

    def support_cells(self):
        return int(np.count_nonzero(self.weights))


def make_mollifier(k, grid):
    """Standard bump at scale k; requires 1/k >= 2h so the kernel is resolvable."""
    k = int(k)
    if k <= 0:
        raise ValueError("k must be a positive integer")
    hmax = max(grid.spacing)
    if 1.0 / k < 2.0 * hmax:
        raise ValueError(f"kernel under-resolved: 1/k = {1.0 / k:g} < 2h = {2 * hmax:g}")
    radii = [int(np.floor(1.0 / (k * h))) for h in grid.spacing]
    axes = [np.arange(-r, r + 1) * h for r, h in zip(radii, grid.spacing)]
    if grid.dim == 1:
        rho2 = (k * axes[0]) ** 2
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        rho2 = (k * X) ** 2 + (k * Y) ** 2
    w = np.zeros_like(rho2)
    inside = rho2 < 1.0
    w[inside] = np.exp(-1.0 / (1.0 - rho2[inside]))
    total = np.sum(w) * grid.cell_volume
    if total <= 0:
        raise ValueError("kernel rasterized to zero mass")
    return Mollifier(k, grid, w / total)


def _convolve_values(values, mol):
    # direct footprint summation, zero extension
    return scipy.ndimage.convolve(values, mol.weights * mol.grid.cell_volume,
                                  mode="constant", cval=0.0)


def convolve_space(f, mol):
    """Space convolution with a mollifier; a ScalarField or a StepTimeSeries
    slice by slice.  Inputs are read zero-extended outside their mask; the
    output is unmasked (its support grows by the kernel radius)."""
    if isinstance(f, StepTimeSeries):
        return StepTimeSeries(f.interval, tuple(convolve_space(g, mol) for g in f.fields))
    if f.grid != mol.grid:
        raise ValueError("grid mismatch between field and mollifier")
    return ScalarField(f.grid, _convolve_values(f.values, mol))


def convolve_staggered(u, mol):
    """Componentwise space convolution of a MAC field; each face family lives on
    its own uniform lattice with the grid spacing, so divergence commutes with
    the convolution exactly."""
    from .grid import StaggeredVectorField

    comps = tuple(_convolve_values(c, mol) for c in u.components)
    return StaggeredVectorField(u.grid, comps)


def shift_space(f, h_vec):
    """tau_h f(x) = f(x - h); the shift must be a lattice vector (integer cells)."""
    h_vec = np.atleast_1d(np.asarray(h_vec, dtype=float))
    g = f.grid
    if h_vec.shape != (g.dim,):
        raise ValueError("shift dimension mismatch")
    steps = []
    for a in range(g.dim):
        r = h_vec[a] / g.spacing[a]
        j = round(r)
        if abs(r - j) > 1e-9:
            raise ValueError(f"non-lattice space shift {h_vec[a]:g} (spacing {g.spacing[a]:g})")
        steps.append(int(j))
    out = np.zeros_like(f.values)
    src = []
    dst = []
    for a, j in enumerate(steps):
        n = g.shape[a]
        if abs(j) >= n:
            return ScalarField(g, out)
        if j >= 0:
            dst.append(slice(j, n))
            src.append(slice(0, n - j))
        else:
            dst.append(slice(0, n + j))
            src.append(slice(-j, n))
    out[tuple(dst)] = f.values[tuple(src)]
    return ScalarField(g, out)


def shift_time(s, sigma):
    """lambda_sigma f(t) = f(t - sigma) for a step series; sigma must sit on the
    series' step lattice (within 1e-9 relative), zero-filled outside."""
    delta = s.delta
    r = sigma / delta
    j = round(r)
    if abs(r - j) > 1e-9 * max(1.0, abs(r)):
        raise ValueError(f"time shift {sigma:g} is not a multiple of the step {delta:g}")
    return shift_series_steps(s, int(j))


def commutator(a, b, mol):
    """S = a (b * phi_k) - (a b) * phi_k per slice, plus its L^1(time x space) norm."""
    if a.interval != b.interval or a.n_steps != b.n_steps:
        raise ValueError("mismatched time partitions")
    fields = []
    l1 = 0.0
    vol = a.grid.cell_volume
    for fa, fb in zip(a.fields, b.fields):
        conv_b = _convolve_values(fb.values, mol)
        conv_ab = _convolve_values(fa.values * fb.values, mol)
        s_vals = fa.values * conv_b - conv_ab
        fields.append(ScalarField(a.grid, s_vals))
        l1 += float(np.sum(np.abs(s_vals))) * vol
    series = StepTimeSeries(a.interval, tuple(fields))
    return series, float(l1 * a.delta)


def commutator_integral_form(fa, fb, mol):
    """Single-slice commutator assembled from the shifted-difference kernel
    representation sum_y [a(x) - a(x-y)] b(x-y) phi(y) h^d; equals the direct
    formula up to rounding (cross-check use)."""
    g = fa.grid
    w = mol.weights
    vol = g.cell_volume
    out = np.zeros(g.shape)
    it = np.ndindex(w.shape)
    center = tuple(s // 2 for s in w.shape)
    for off in it:
        wt = w[off]
        if wt == 0.0:
            continue
        cells = tuple(o - c for o, c in zip(off, center))
        h_vec = [cells[a] * g.spacing[a] for a in range(g.dim)]
        shifted_a = shift_space(fa, h_vec).values
        shifted_b = shift_space(fb, h_vec).values
        out += (fa.values - shifted_a) * shifted_b * wt * vol
    return ScalarField(g, out)
