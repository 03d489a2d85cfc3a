"""Reproducing kernel, its norm statistics, and the idempotent projector.

The concrete kernel is separable:

    K(x, y; s, t) = kappa_t(x, s) * kappa_s(y, t),
    kappa(u, v)   = sum_k beta(u - k) * dual_beta(v - k),

built from a tensor B-spline generator and its dual.  Separability makes
the nested sup/integral kernel norm factor exactly into per-axis norms,
reduces the projector to analysis/synthesis matrix products, and keeps
every quadrature one-dimensional.  Kernels are immutable after
construction; all evaluation is pure and cache reads are safe after the
lazily built statistics have been populated.

Norm conventions.  The W0 norm of a two-argument kernel is
max(sup_u int |k(u, v)| dv, sup_v int |k(u, v)| du); the full kernel norm
nests W0 over (y, t) inside W0 over (x, s).  Sups are grid maxima at a
documented resolution (samples per unit length), integrals composite
quadratures; doubling the resolution is the intended self-validation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ResolutionError
from .generator import (
    BIORTH_TOL,
    TAIL_TOL,
    bspline_eval,
)
from .mixed_norm import CoefSeq, GridFunction, composite_weights, mixed_function_norm, mixed_sequence_norm

DEFAULT_STATS_RESOLUTION = 64
N_MODULUS_RADII = 8


# ---------------------------------------------------------------------------
# one-dimensional kernel factors
# ---------------------------------------------------------------------------

class SplineFactor1D:
    """kappa(u, v) = sum_k beta(u - k) dual_beta(v - k) for one axis.

    Invariant under the diagonal integer shift kappa(u + 1, v + 1) =
    kappa(u, v), which reduces every sup over the real line to one period.
    """

    def __init__(self, order, dual_axis):
        self.order = order
        self.dual_axis = dual_axis
        # |u - v| beyond this radius guarantees kappa = 0
        self.reach = order / 2.0 + dual_axis.reach

    def eval_outer(self, us, vs):
        """Matrix kappa(us[i], vs[j]) via the finite k-sum."""
        us = np.asarray(us, dtype=float)
        vs = np.asarray(vs, dtype=float)
        r = self.order / 2.0
        k_lo = int(np.floor(us.min() - r))
        k_hi = int(np.ceil(us.max() + r))
        out = np.zeros((us.size, vs.size))
        for k in range(k_lo, k_hi + 1):
            bu = bspline_eval(self.order, us - k)
            if not np.any(bu):
                continue
            out += np.outer(bu, self.dual_axis.eval(vs - k))
        return out

    def eval_pairs(self, us, vs):
        """kappa at broadcast point arrays."""
        us, vs = np.broadcast_arrays(np.asarray(us, dtype=float), np.asarray(vs, dtype=float))
        r = self.order / 2.0
        out = np.zeros(us.shape)
        k_lo = int(np.floor(us.min() - r))
        k_hi = int(np.ceil(us.max() + r))
        for k in range(k_lo, k_hi + 1):
            out += bspline_eval(self.order, us - k) * self.dual_axis.eval(vs - k)
        return out

    # -- W0-norm machinery ---------------------------------------------------

    def _table(self, resolution, pad_steps=0):
        """kappa sampled on x in [-pad, 1 + pad], s in [-R - pad, R + pad]."""
        R = int(np.ceil(self.reach)) + 1
        h = 1.0 / resolution
        xs = np.arange(-pad_steps, resolution + pad_steps + 1) * h
        ss = np.arange(-R * resolution - pad_steps, R * resolution + pad_steps + 1) * h
        return xs, ss, self.eval_outer(xs, ss), R

    @staticmethod
    def _w0_from_field(field, resolution, R, pad_steps=0):
        """W0 norm of a diagonally shift-invariant field sampled as in `_table`.

        `field` rows cover x in [0, 1] after stripping `pad_steps`; columns
        cover s in [-R, R].  Row direction: sup over one period of the row
        integrals.  Column direction: integrals over the real line fold into
        sums of one-period integrals of shifted columns.
        """
        core = field[pad_steps: field.shape[0] - pad_steps,
                     pad_steps: field.shape[1] - pad_steps]
        n_rows, n_cols = core.shape
        w_s = composite_weights(n_cols, 1.0 / resolution)
        sup_row = float(np.max(np.abs(core) @ w_s))

        w_x = composite_weights(n_rows, 1.0 / resolution)
        col_int = w_x @ np.abs(core)  # integral over x in [0, 1] per column
        # fold columns one unit apart: int_R |k(u, s*)| du = sum_m J(s* - m)
        sup_col = 0.0
        for l in range(resolution):
            acc = float(np.sum(col_int[l::resolution]))
            sup_col = max(sup_col, acc)
        return max(sup_row, sup_col)

    def w0_norm(self, resolution=DEFAULT_STATS_RESOLUTION):
        _, _, field, R = self._table(resolution)
        return self._w0_from_field(field, resolution, R)

    def box_modulus_w0(self, radius, resolution=DEFAULT_STATS_RESOLUTION):
        """W0 norm of the box modulus sup_{|du|,|dv| <= radius} |kappa shift - kappa|.

        Shifts are snapped to the sample grid (ladder of 8 radii per axis,
        both signs), so shifted reads are array views and, for generators with
        grid-aligned breakpoints, the sampled field is exact at the nodes.
        Radii below the grid scale use exact off-grid evaluations at the box
        corners and axis extremes instead (correct to second order there).
        """
        if radius < 0:
            raise InputError("modulus radius must be nonnegative")
        if radius == 0:
            return 0.0
        if radius * resolution < N_MODULUS_RADII:
            return self._box_modulus_w0_direct(radius, resolution)
        pad = int(np.floor(radius * resolution))
        _, _, field, R = self._table(resolution, pad_steps=pad)
        offs = sorted({int(np.floor(radius * resolution * j / N_MODULUS_RADII))
                       for j in range(1, N_MODULUS_RADII + 1)} - {0})
        offsets = [0] + [o for off in offs for o in (off, -off)]
        nx = field.shape[0] - 2 * pad
        ns = field.shape[1] - 2 * pad
        base = field[pad: pad + nx, pad: pad + ns]
        mod = np.zeros_like(base)
        for o1 in offsets:
            for o2 in offsets:
                if o1 == 0 and o2 == 0:
                    continue
                shifted = field[pad + o1: pad + o1 + nx, pad + o2: pad + o2 + ns]
                np.maximum(mod, np.abs(shifted - base), out=mod)
        return self._w0_from_field(mod, resolution, R)

    def _box_modulus_w0_direct(self, radius, resolution):
        R = int(np.ceil(self.reach)) + 1
        h = 1.0 / resolution
        xs = np.arange(0, resolution + 1) * h
        ss = np.arange(-R * resolution, R * resolution + 1) * h
        base = self.eval_outer(xs, ss)
        mod = np.zeros_like(base)
        shifts = [(dx, ds) for dx in (-radius, 0.0, radius)
                  for ds in (-radius, 0.0, radius) if (dx, ds) != (0.0, 0.0)]
        for dx, ds in shifts:
            np.maximum(mod, np.abs(self.eval_outer(xs + dx, ss + ds) - base), out=mod)
        return self._w0_from_field(mod, resolution, R)


class GridFactor1D:
    """One-dimensional kernel given by values on a fixed quadrature grid.

    Used for cell-averaged and Neumann-composed kernels where no closed
    form exists.  Composition is weighted matrix product; norms are the
    window-restricted row/column estimates.
    """

    def __init__(self, xs, matrix, weights):
        self.xs = np.asarray(xs, dtype=float)
        self.matrix = np.asarray(matrix, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if self.matrix.shape != (self.xs.size, self.xs.size):
            raise InputError("grid factor matrix must be square on its grid")

    def compose(self, other):
        if other.xs.shape != self.xs.shape or not np.array_equal(other.xs, self.xs):
            raise InputError("grid factors must share a grid to compose")
        return GridFactor1D(self.xs, self.matrix @ (self.weights[:, None] * other.matrix), self.weights)

    def w0_norm(self, interior=None):
        """max(sup-row integral, sup-column integral); `interior = (lo, hi)`
        restricts the sups (not the integrals) to grid points in the interval,
        for factors assembled on padded grids."""
        a = np.abs(self.matrix)
        if interior is None:
            mask = np.ones(self.xs.size, dtype=bool)
        else:
            mask = (self.xs >= interior[0]) & (self.xs <= interior[1])
        return float(max((a @ self.weights)[mask].max(), (self.weights @ a)[mask].max()))


# ---------------------------------------------------------------------------
# separable kernels
# ---------------------------------------------------------------------------

class Kernel:
    """Separable kernel K(x, y; s, t) = scale * kappa_t(x, s) * kappa_s(y, t).

    Caches the per-axis W0 norms and a table of modulus-of-continuity norms
    keyed by radius.  The modulus table is kept monotone in the radius (the
    true modulus is), so sweeps over radii are consistent by construction.
    """

    def __init__(self, factor_t, factor_s, generator=None, dual=None, scale=1.0,
                 stats_resolution=DEFAULT_STATS_RESOLUTION):
        self.factor_t = factor_t
        self.factor_s = factor_s
        self.generator = generator
        self.dual = dual
        self.scale = scale
        self.stats_resolution = stats_resolution
        self._w0 = {}
        self._omega_raw = {}

    def eval(self, x, y, s, t):
        x, y, s, t = np.broadcast_arrays(*(np.atleast_1d(np.asarray(a, dtype=float))
                                           for a in (x, y, s, t)))
        out = self.scale * self.factor_t.eval_pairs(x, s) * self.factor_s.eval_pairs(y, t)
        return float(out.ravel()[0]) if out.size == 1 else out

    def scaled(self, a):
        return Kernel(self.factor_t, self.factor_s, self.generator, self.dual,
                      scale=a * self.scale, stats_resolution=self.stats_resolution)

    def _factor_w0(self, axis, resolution):
        key = (axis, resolution)
        if key not in self._w0:
            factor = self.factor_t if axis == "t" else self.factor_s
            self._w0[key] = factor.w0_norm(resolution)
        return self._w0[key]

    def w_norm(self, resolution=None):
        """Nested W0-over-W0 estimate; factors exactly for separable kernels."""
        res = resolution or self.stats_resolution
        return abs(self.scale) * self._factor_w0("t", res) * self._factor_w0("s", res)

    def omega_w_norm(self, radius, resolution=None):
        """Estimate of the kernel-norm of the modulus of continuity at `radius`.

        Upper-bound route: the modulus of a product of axis factors is bounded
        by mu_t*|k_s| + |k_t|*mu_s + mu_t*mu_s with per-axis box moduli mu, and
        the kernel norm of each tensor term is the product of the factor W0
        norms.  Cached values keep the table monotone non-decreasing in the
        radius.
        """
        res = resolution or self.stats_resolution
        key = (radius, res)
        if key not in self._omega_raw:
            mu_t = self.factor_t.box_modulus_w0(radius, res)
            mu_s = self.factor_s.box_modulus_w0(radius, res)
            k_t = self._factor_w0("t", res)
            k_s = self._factor_w0("s", res)
            self._omega_raw[key] = abs(self.scale) * (mu_t * k_s + k_t * mu_s + mu_t * mu_s)
        raw = self._omega_raw[key]
        below = [v for (r, rr), v in self._omega_raw.items() if rr == res and r <= radius]
        return max([raw] + below)


def kernel_w_norm(kernel, resolution=None):
    """Nested sup/integral kernel norm estimate at the given probe resolution."""
    return kernel.w_norm(resolution)


def build_shift_invariant_kernel(gen, dual, stats_resolution=DEFAULT_STATS_RESOLUTION):
    """Kernel of the idempotent projector onto the shift-invariant space.

    Refuses construction when the dual is not trustworthy: biorthogonality
    residual above 1e-8 or coefficient tail bound above 1e-10.
    """
    if dual.biorth_residual > BIORTH_TOL:
        raise InputError(
            f"dual biorthogonality residual {dual.biorth_residual:.3e} above {BIORTH_TOL:.0e}"
        )
    if dual.tail_bound > TAIL_TOL:
        raise InputError(f"dual tail bound {dual.tail_bound:.3e} above {TAIL_TOL:.0e}")
    return Kernel(
        SplineFactor1D(gen.order_t, dual.axis_t),
        SplineFactor1D(gen.order_s, dual.axis_s),
        generator=gen,
        dual=dual,
        stats_resolution=stats_resolution,
    )


def generic_w_norm(eval4, s_reach, resolution=8):
    """Literal nested kernel-norm estimate through the abstract evaluator.

    Assumes diagonal integer shift-invariance in each argument pair so sups
    reduce to one period; integrals run over [-R, R] with R = ceil(s_reach)+1.
    Quadratically more expensive than the separable fast path; intended for
    validating that path on small kernels.
    """
    R = int(np.ceil(s_reach)) + 1
    h = 1.0 / resolution
    xs = np.arange(0, resolution + 1) * h
    ss = np.arange(-R * resolution, R * resolution + 1) * h
    inner = np.zeros((xs.size, ss.size))
    for i, x in enumerate(xs):
        for j, s in enumerate(ss):
            field = eval4(x, xs[:, None], s, ss[None, :])
            inner[i, j] = SplineFactor1D._w0_from_field(field, resolution, R)
    return SplineFactor1D._w0_from_field(inner, resolution, R)


# ---------------------------------------------------------------------------
# coefficient windows, signals in V, and the projector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Window:
    """Inclusive coefficient index window, interior to the grid by a margin."""

    k1_first: int
    k1_last: int
    k2_first: int
    k2_last: int

    @property
    def n1(self):
        return self.k1_last - self.k1_first + 1

    @property
    def n2(self):
        return self.k2_last - self.k2_first + 1

    @property
    def k1s(self):
        return np.arange(self.k1_first, self.k1_last + 1)

    @property
    def k2s(self):
        return np.arange(self.k2_first, self.k2_last + 1)

    @property
    def key(self):
        return (self.k1_first, self.k1_last, self.k2_first, self.k2_last)


def window_for_grid(grid, gen, margin_extra=2):
    """Interior window keeping coefficients (support radius + margin) off the edges.

    The margin guarantees that every rendered signal with window coefficients
    is supported strictly inside the grid, so analysis integrals against the
    dual never truncate.
    """
    mt = int(np.ceil(gen.order_t / 2.0)) + margin_extra
    ms = int(np.ceil(gen.order_s / 2.0)) + margin_extra
    k1_first = int(np.ceil(grid.x_min)) + mt
    k1_last = int(np.floor(grid.x_max)) - mt
    k2_first = int(np.ceil(grid.y_min)) + ms
    k2_last = int(np.floor(grid.y_max)) - ms
    if k1_last < k1_first or k2_last < k2_first:
        raise InputError("grid too small for an interior coefficient window")
    return Window(k1_first, k1_last, k2_first, k2_last)


_SYNTHESIS_CACHE = {}


def synthesis_matrices(grid, gen, window):
    """Per-axis matrices B[i, k] = beta(grid point i - lattice point k)."""
    key = (grid, window.key, gen.order_t, gen.order_s)
    if key not in _SYNTHESIS_CACHE:
        B_t = bspline_eval(gen.order_t, grid.xs[:, None] - window.k1s[None, :])
        B_s = bspline_eval(gen.order_s, grid.ys[:, None] - window.k2s[None, :])
        _SYNTHESIS_CACHE[key] = (B_t, B_s)
    return _SYNTHESIS_CACHE[key]


class VSignal:
    """Member of the shift-invariant signal space: coefficients plus generator."""

    def __init__(self, coeffs, generator):
        self.coeffs = coeffs
        self.generator = generator

    @classmethod
    def zeros(cls, window, generator):
        return cls(CoefSeq(np.zeros((window.n1, window.n2)), window.k1_first, window.k2_first), generator)

    @property
    def window(self):
        c = self.coeffs
        return Window(c.k1_first, c.k1_first + c.entries.shape[0] - 1,
                      c.k2_first, c.k2_first + c.entries.shape[1] - 1)

    def render(self, grid):
        B_t, B_s = synthesis_matrices(grid, self.generator, self.window)
        return GridFunction(grid, B_t @ self.coeffs.entries @ B_s.T)

    def eval_pairs(self, xs, ys):
        """Exact values f(xs[i], ys[i]) by direct spline synthesis."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        w = self.window
        V1 = bspline_eval(self.generator.order_t, xs[:, None] - w.k1s[None, :])
        V2 = bspline_eval(self.generator.order_s, ys[:, None] - w.k2s[None, :])
        return np.einsum("ik,kl,il->i", V1, self.coeffs.entries, V2)

    def slice_coef(self, y0):
        """Time-axis coefficients of the slice x -> f(x, y0)."""
        w = self.window
        bs = bspline_eval(self.generator.order_s, float(y0) - w.k2s)
        return self.coeffs.entries @ bs

    def eval_slice(self, y0, xs):
        w = self.window
        c1 = self.slice_coef(y0)
        B = bspline_eval(self.generator.order_t, np.asarray(xs, dtype=float)[:, None] - w.k1s[None, :])
        return B @ c1

    def scaled(self, a):
        return VSignal(CoefSeq(a * self.coeffs.entries, self.coeffs.k1_first, self.coeffs.k2_first),
                       self.generator)

    def __sub__(self, other):
        if self.window.key != other.window.key:
            raise InputError("signal windows differ")
        return VSignal(CoefSeq(self.coeffs.entries - other.coeffs.entries,
                               self.coeffs.k1_first, self.coeffs.k2_first), self.generator)


def _analysis_matrices(kernel, grid, window):
    cache = getattr(kernel, "_analysis_cache", None)
    if cache is None:
        cache = kernel._analysis_cache = {}
    key = (grid, window.key)
    if key not in cache:
        wx, wy = grid.weights_x, grid.weights_y
        W_t = wx[:, None] * kernel.dual.axis_t.eval(grid.xs[:, None] - window.k1s[None, :])
        W_s = wy[:, None] * kernel.dual.axis_s.eval(grid.ys[:, None] - window.k2s[None, :])
        cache[key] = (W_t, W_s)
    return cache[key]


def apply_T(kernel, f, window=None, self_check=True):
    """Idempotent projector onto the signal space, in analysis/synthesis form.

    Coefficients are quadrature inner products of f against dual shifts;
    identical to the integral operator with the separable kernel but at
    two-matrix-product cost.  The optional self-check verifies (once per
    grid/window pair) that the grid quadrature resolves biorthogonality of
    the basis pair, which is exactly the condition for the projector to be
    idempotent on this grid; it raises `ResolutionError` otherwise.
    """
    if kernel.dual is None or kernel.generator is None:
        raise InputError("projector requires a generator-backed kernel")
    grid = f.grid
    if window is None:
        window = window_for_grid(grid, kernel.generator)
    if self_check:
        _grid_resolution_check(kernel, grid, window)
    W_t, W_s = _analysis_matrices(kernel, grid, window)
    coefs = kernel.scale * (W_t.T @ f.values @ W_s)
    return VSignal(CoefSeq(coefs, window.k1_first, window.k2_first), kernel.generator)


def _grid_resolution_check(kernel, grid, window, tol=1e-8):
    """Check that <phi(.-k0), dual(.-k)> computed on this grid is delta_{k,k0}.

    The integrand is supported on the generator cell around the central
    window index, so only that local slice of the grid enters.  Results are
    cached on the kernel, making the check free after the first call.
    """
    cache = getattr(kernel, "_rescheck_cache", None)
    if cache is None:
        cache = kernel._rescheck_cache = {}
    key = (grid, window.key)
    if key in cache:
        return
    gen, dual = kernel.generator, kernel.dual
    k10 = (window.k1_first + window.k1_last) // 2
    k20 = (window.k2_first + window.k2_last) // 2

    def local_slice(points, center, radius, h):
        # start at an even index so local Simpson panels match the global
        # panel structure (keeps knot-aligned integrands exactly integrable)
        i0 = int(np.searchsorted(points, center - radius - h))
        i0 -= i0 % 2
        i1 = int(np.searchsorted(points, center + radius + h, side="right"))
        if (i1 - i0) % 2 == 0:
            i1 = min(i1 + 1, points.size)
        return points[i0:i1]

    xs = local_slice(grid.xs, k10, gen.order_t / 2.0, grid.h_x)
    ys = local_slice(grid.ys, k20, gen.order_s / 2.0, grid.h_y)
    wx = composite_weights(xs.size, grid.h_x)
    wy = composite_weights(ys.size, grid.h_y)
    bx = bspline_eval(gen.order_t, xs - k10) * wx
    by = bspline_eval(gen.order_s, ys - k20) * wy
    worst = 0.0
    for dk1 in (-1, 0, 1):
        for dk2 in (-1, 0, 1):
            val = float(bx @ np.outer(dual.axis_t.eval(xs - k10 - dk1),
                                      dual.axis_s.eval(ys - k20 - dk2)) @ by)
            target = 1.0 if (dk1 == 0 and dk2 == 0) else 0.0
            worst = max(worst, abs(val - target))
    if worst > tol:
        raise ResolutionError(
            f"grid quadrature breaks biorthogonality by {worst:.3e}; grid too coarse"
        )
    cache[key] = True


def kernel_slice(kernel, s, t, grid):
    """K(., .; s, t) rendered on the grid (a member of the signal space)."""
    vt = kernel.factor_t.eval_outer(grid.xs, np.array([float(s)]))[:, 0]
    vs = kernel.factor_s.eval_outer(grid.ys, np.array([float(t)]))[:, 0]
    return GridFunction(grid, kernel.scale * np.outer(vt, vs))


def reproducing_bound(kernel, x, y, params, grid):
    """Point-evaluation constant: mixed (p', q') norm of the kernel slice at (x, y).

    For separable kernels the mixed norm of the slice factors into per-axis
    L^{p'} and L^{q'} quadratures over the grid axes.
    """
    vt = np.abs(kernel.factor_t.eval_outer(np.array([float(x)]), grid.xs)[0])
    vs = np.abs(kernel.factor_s.eval_outer(np.array([float(y)]), grid.ys)[0])
    pc, qc = params.p_conj, params.q_conj
    if pc == np.inf:
        nt = vt.max()
    else:
        nt = (vt**pc @ grid.weights_x) ** (1.0 / pc)
    if qc == np.inf:
        ns = vs.max()
    else:
        ns = (vs**qc @ grid.weights_y) ** (1.0 / qc)
    return float(abs(kernel.scale) * nt * ns)


def reproducing_residual(kernel, probes, spacing=1.0 / 32.0):
    """Residuals |int K(x,y;u,v) K(u,v;s,t) du dv - K(x,y;s,t)| at probe 4-tuples.

    Literal composite quadrature of the composed kernel over the joint
    support, anchored to integer panel boundaries.
    """
    out = []
    rt = kernel.factor_t.reach
    rs = kernel.factor_s.reach
    for (x, y, s, t) in probes:
        lo_u = np.floor(min(x, s) - rt)
        hi_u = np.ceil(max(x, s) + rt)
        lo_v = np.floor(min(y, t) - rs)
        hi_v = np.ceil(max(y, t) + rs)
        us = np.linspace(lo_u, hi_u, int(round((hi_u - lo_u) / spacing)) + 1)
        vs = np.linspace(lo_v, hi_v, int(round((hi_v - lo_v) / spacing)) + 1)
        wu = composite_weights(us.size, spacing)
        wv = composite_weights(vs.size, spacing)
        at = kernel.factor_t.eval_outer(np.array([x]), us)[0] * kernel.factor_t.eval_outer(us, np.array([s]))[:, 0]
        as_ = kernel.factor_s.eval_outer(np.array([y]), vs)[0] * kernel.factor_s.eval_outer(vs, np.array([t]))[:, 0]
        integral = kernel.scale**2 * float(wu @ np.outer(at, as_) @ wv)
        out.append(abs(integral - kernel.eval(x, y, s, t)))
    return np.array(out)


def analysis_bound_check(f, kernel, params, window=None):
    """Both sides of the analysis bound: (coef norm, function norm * dual amalgam norm)."""
    sig = apply_T(kernel, f, window=window, self_check=False)
    lhs = mixed_sequence_norm(sig.coeffs, params)
    rhs = mixed_function_norm(f, params) * kernel.dual.amalgam_norm()
    return lhs, rhs
