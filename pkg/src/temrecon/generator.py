"""Tensor-product B-spline generators, their duals, and amalgam statistics.

The concrete generator family is the centered cardinal B-spline, tensored
over the time and space axes.  Orders >= 2 give continuous, compactly
supported generators that form a partition of unity and have a Gram symbol
bounded away from zero, so a dual generator with absolutely summable
expansion coefficients exists.  The dual solve inverts the periodized Gram
symbol on a ring by discrete Fourier transform and truncates the (geometric)
coefficient tail.

Amalgam ("sum of unit-cell suprema") norms and moduli of continuity are
grid estimates at a documented resolution: cell suprema are maxima over
closed-cell sample grids, shift suprema run over a finite direction/radius
probe set.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, SingularGeneratorError, WindowGrowthError

BIORTH_TOL = 1e-8
TAIL_TOL = 1e-10
TRUNC_TOL = 1e-14


# ---------------------------------------------------------------------------
# centered cardinal B-splines
# ---------------------------------------------------------------------------

def bspline_eval(order, x):
    """Centered cardinal B-spline of the given order, vectorized in x.

    Zero outside [-order/2, order/2]; order 1 is the unit indicator,
    order 2 the hat.  Evaluation runs the usual triangular recursion on
    the uniform knot ladder, O(order^2) array operations.
    """
    if int(order) != order or order < 1:
        raise InputError(f"B-spline order must be an integer >= 1, got {order!r}")
    order = int(order)
    x = np.asarray(x, dtype=float)
    if order == 1:
        return ((x >= -0.5) & (x < 0.5)).astype(float)
    if order == 2:
        return np.maximum(1.0 - np.abs(x), 0.0)  # identical to the recursion
    t = x + order / 2.0  # shift to the knot ladder 0..order
    vals = [((t - j >= 0.0) & (t - j < 1.0)).astype(float) for j in range(order)]
    for m in range(1, order):
        nxt = []
        for j in range(order - m):
            tj = t - j
            nxt.append((tj * vals[j] + (m + 1 - tj) * vals[j + 1]) / m)
        vals = nxt
    return vals[0]


def bspline_support(order):
    return (-order / 2.0, order / 2.0)


def bspline_autocorr(order):
    """Integer-shift inner products a(j) = <beta, beta(.-j)>, j = -(order-1)..order-1.

    Closed form: the autocorrelation of a centered B-spline of order m is the
    centered B-spline of order 2m evaluated at the integers.
    """
    offsets = np.arange(-(order - 1), order)
    return offsets, bspline_eval(2 * order, offsets.astype(float))


def gauss_panel_rule(lo, hi, points_per_panel, panel=0.5):
    """Gauss--Legendre nodes/weights tiled over knot-aligned panels of [lo, hi].

    Panels of width 0.5 keep every knot of integer- and half-integer-knot
    splines on a panel boundary, so the rule is exact for the piecewise
    polynomials handled here once `points_per_panel` covers the degree.
    """
    lo = np.floor(lo / panel) * panel
    hi = np.ceil(hi / panel) * panel
    n_panels = int(round((hi - lo) / panel))
    gx, gw = np.polynomial.legendre.leggauss(points_per_panel)
    starts = lo + panel * np.arange(n_panels)
    nodes = (starts[:, None] + panel * (gx[None, :] + 1.0) / 2.0).ravel()
    weights = np.tile(gw * panel / 2.0, n_panels)
    return nodes, weights


# ---------------------------------------------------------------------------
# amalgam norms and moduli of continuity (grid estimates)
# ---------------------------------------------------------------------------

def amalgam_norm_1d(f, lo, hi, samples_per_unit=64):
    """Sum over unit cells [k, k+1) of the cell supremum of |f|.

    Cell suprema are maxima over closed-cell grids with `samples_per_unit`
    subintervals, so the value is a deterministic lower estimate that is
    exact whenever |f| attains its cell maxima on the sample grid (true for
    piecewise-linear f with integer breakpoints).
    """
    k_lo = int(np.floor(lo))
    k_hi = int(np.ceil(hi))
    total = 0.0
    for k in range(k_lo, k_hi):
        cell = np.linspace(k, k + 1.0, samples_per_unit + 1)
        total += float(np.max(np.abs(f(cell))))
    return total


def amalgam_norm_2d(f2, box, samples_per_unit=64):
    """Amalgam norm of a 2-d function over unit cells of the given box."""
    xlo, xhi, ylo, yhi = box
    total = 0.0
    for k1 in range(int(np.floor(xlo)), int(np.ceil(xhi))):
        xs = np.linspace(k1, k1 + 1.0, samples_per_unit + 1)
        for k2 in range(int(np.floor(ylo)), int(np.ceil(yhi))):
            ys = np.linspace(k2, k2 + 1.0, samples_per_unit + 1)
            total += float(np.max(np.abs(f2(xs[:, None], ys[None, :]))))
    return total


def _probe_radii(delta, n_radii):
    return delta * np.arange(1, n_radii + 1) / n_radii


def modulus_1d(f, delta, xs, n_radii=8):
    """Pointwise sup over |shift| <= delta of |f(x + shift) - f(x)| on `xs`."""
    if delta < 0:
        raise InputError("modulus radius must be nonnegative")
    xs = np.asarray(xs, dtype=float)
    base = f(xs)
    out = np.zeros_like(base)
    for r in _probe_radii(delta, n_radii):
        for s in (r, -r):
            np.maximum(out, np.abs(f(xs + s) - base), out=out)
    return out


def modulus_of_continuity(f2, delta, xs, ys, n_dirs=16, n_radii=8):
    """Grid-sampled modulus of continuity of a 2-d function.

    sup over shifts of Euclidean length <= delta of
    |f(x + x', y + y') - f(x, y)|, with the shift sup taken over
    `n_dirs` directions times `n_radii` radii.  Monotone non-decreasing
    in delta; identically zero at delta = 0.
    """
    if delta < 0:
        raise InputError("modulus radius must be nonnegative")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    base = f2(xs[:, None], ys[None, :])
    out = np.zeros_like(base)
    angles = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    for r in _probe_radii(delta, n_radii):
        for a in angles:
            dx, dy = r * np.cos(a), r * np.sin(a)
            np.maximum(out, np.abs(f2(xs[:, None] + dx, ys[None, :] + dy) - base), out=out)
    return out


def modulus_amalgam_1d(f, delta, lo, hi, samples_per_unit=64, n_radii=8):
    """Amalgam norm of the 1-d modulus of continuity at radius delta."""
    return amalgam_norm_1d(
        lambda x: modulus_1d(f, delta, x, n_radii=n_radii),
        lo - delta,
        hi + delta,
        samples_per_unit=samples_per_unit,
    )


# ---------------------------------------------------------------------------
# generator and dual generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
    """Tensor product of centered cardinal B-splines, one order per axis.

    Orders must be >= 2 so the generator is continuous; it then lies in the
    amalgam space, is compactly supported, and its integer translates form a
    partition of unity.
    """

    order_t: int
    order_s: int

    def __post_init__(self):
        for name, o in (("order_t", self.order_t), ("order_s", self.order_s)):
            if int(o) != o or o < 2:
                raise InputError(f"{name} must be an integer >= 2, got {o!r}")

    @property
    def support_radius_t(self):
        return self.order_t / 2.0

    @property
    def support_radius_s(self):
        return self.order_s / 2.0

    def eval_t(self, x):
        return bspline_eval(self.order_t, x)

    def eval_s(self, y):
        return bspline_eval(self.order_s, y)

    def eval(self, x, y):
        return bspline_eval(self.order_t, x) * bspline_eval(self.order_s, y)

    def amalgam_norm_t(self, samples_per_unit=64):
        r = self.support_radius_t
        return amalgam_norm_1d(self.eval_t, -r, r, samples_per_unit)

    def amalgam_norm_s(self, samples_per_unit=64):
        r = self.support_radius_s
        return amalgam_norm_1d(self.eval_s, -r, r, samples_per_unit)

    def amalgam_norm(self, samples_per_unit=64):
        """2-d amalgam norm; exact product of the per-axis norms for tensor functions."""
        return self.amalgam_norm_t(samples_per_unit) * self.amalgam_norm_s(samples_per_unit)

    def partition_residual(self, x, y):
        """max |sum_k phi(x - k1, y - k2) - 1| over the given points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        acc_t = np.zeros_like(x)
        for k in range(int(np.floor(x.min() - self.support_radius_t)),
                       int(np.ceil(x.max() + self.support_radius_t)) + 1):
            acc_t += self.eval_t(x - k)
        acc_s = np.zeros_like(y)
        for k in range(int(np.floor(y.min() - self.support_radius_s)),
                       int(np.ceil(y.max() + self.support_radius_s)) + 1):
            acc_s += self.eval_s(y - k)
        return float(np.max(np.abs(acc_t * acc_s - 1.0)))


@dataclass(frozen=True)
class DualAxis:
    """One axis of a dual generator: expansion coefficients b on integer offsets."""

    order: int
    offsets: np.ndarray
    b: np.ndarray
    tail_bound: float
    symbol_min: float
    ring_size: int

    @property
    def radius(self):
        return int(self.offsets[-1])

    @property
    def reach(self):
        """Support radius of the dual function sum_j b(j) beta(. - j)."""
        return self.radius + self.order / 2.0

    @property
    def b_l1(self):
        return float(np.abs(self.b).sum())

    def eval(self, x):
        """dual(x) = sum_j b(j) beta(x - j), using only the `order` shifts
        whose spline factor can be nonzero at each point.

        The spline support is [-order/2, order/2): left-closed, so the
        contributing shifts are the `order` integers ending at
        floor(x + order/2) (this matters for the discontinuous order-1 case).
        """
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        j_last = np.floor(x + self.order / 2.0).astype(int)
        for l in range(self.order):
            j = j_last - l
            idx = j - int(self.offsets[0])
            valid = (idx >= 0) & (idx < self.b.size)
            coef = np.where(valid, self.b[np.clip(idx, 0, self.b.size - 1)], 0.0)
            out += coef * bspline_eval(self.order, x - j)
        return out


def dual_coeffs_from_autocorr(a_offsets, a_values, order, ring_size=64, trunc=TRUNC_TOL):
    """Solve the periodized deconvolution a * b = delta on a ring.

    The autocorrelation symbol is a trigonometric polynomial with positive
    minimum, so the ring inverse converges geometrically to the absolutely
    summable inverse filter; coefficients below `trunc` are dropped and the
    largest dropped magnitude is reported as the tail bound.
    """
    a_offsets = np.asarray(a_offsets, dtype=int)
    a_values = np.asarray(a_values, dtype=float)
    if ring_size < 2 * (int(np.max(np.abs(a_offsets))) + 1):
        raise InputError("ring size too small for the autocorrelation support")
    ring = np.zeros(ring_size)
    for off, val in zip(a_offsets, a_values):
        ring[off % ring_size] += val
    symbol = np.real(np.fft.fft(ring))
    symbol_min = float(symbol.min())
    if symbol_min < 1e-8:
        raise SingularGeneratorError(
            f"Gram symbol lower bound {symbol_min:.3e} below 1e-08; generator is singular"
        )
    b_ring = np.real(np.fft.ifft(1.0 / np.fft.fft(ring)))
    radius_max = ring_size // 2
    full = np.array([b_ring[j % ring_size] for j in range(-radius_max, radius_max + 1)])
    mags = np.abs(full)
    keep = radius_max
    while keep > 0 and mags[radius_max + keep] < trunc and mags[radius_max - keep] < trunc:
        keep -= 1
    dropped = np.concatenate([mags[: radius_max - keep], mags[radius_max + keep + 1:]])
    if dropped.size:
        tail_bound = float(dropped.max())
    else:
        # nothing fell below the truncation threshold: extrapolate the
        # geometric tail from the outermost retained coefficients
        edge, prev = mags[-1], mags[-2]
        ratio = edge / prev if prev > 0 else 1.0
        tail_bound = float(edge * ratio / (1.0 - ratio)) if ratio < 1.0 else float(edge)
    if tail_bound > TAIL_TOL:
        raise WindowGrowthError(
            f"dual tail bound {tail_bound:.3e} above {TAIL_TOL:.0e}; increase ring_size"
        )
    offsets = np.arange(-keep, keep + 1)
    b = full[radius_max - keep: radius_max + keep + 1].copy()
    return offsets, b, tail_bound, symbol_min


def _biorth_integrals_1d(order, axis):
    """Quadrature inner products <dual, beta(.-j)> for all relevant j.

    Gauss panels aligned to half-integer knots make the rule exact for the
    piecewise-polynomial integrand, giving an oracle independent of the
    Fourier ring solve.
    """
    reach = axis.reach
    r = int(np.ceil(reach + order / 2.0))
    nodes, weights = gauss_panel_rule(-reach, reach, order + 1)
    dual_vals = axis.eval(nodes) * weights
    js = np.arange(-r, r + 1)
    vals = np.array([float(dual_vals @ bspline_eval(order, nodes - j)) for j in js])
    return js, vals


@dataclass(frozen=True)
class DualGenerator:
    """Dual generator as a separable expansion over shifts of the generator.

    dual(x, y) = sum_k b_t(k1) b_s(k2) phi(x - k1, y - k2); biorthogonality
    against integer shifts of the generator holds up to `biorth_residual`.
    """

    generator: Generator
    axis_t: DualAxis
    axis_s: DualAxis
    biorth_residual: float

    def eval_t(self, x):
        return self.axis_t.eval(x)

    def eval_s(self, y):
        return self.axis_s.eval(y)

    def eval(self, x, y):
        return self.axis_t.eval(x) * self.axis_s.eval(y)

    @property
    def tail_bound(self):
        return max(self.axis_t.tail_bound, self.axis_s.tail_bound)

    @property
    def b_l1(self):
        return self.axis_t.b_l1 * self.axis_s.b_l1

    def amalgam_norm_t(self, samples_per_unit=64):
        r = self.axis_t.reach
        return amalgam_norm_1d(self.eval_t, -r, r, samples_per_unit)

    def amalgam_norm_s(self, samples_per_unit=64):
        r = self.axis_s.reach
        return amalgam_norm_1d(self.eval_s, -r, r, samples_per_unit)

    def amalgam_norm(self, samples_per_unit=64):
        return self.amalgam_norm_t(samples_per_unit) * self.amalgam_norm_s(samples_per_unit)

    def coef_2d(self):
        """Dense separable coefficient window b(k1, k2) = b_t(k1) * b_s(k2)."""
        return np.outer(self.axis_t.b, self.axis_s.b)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("k1,k2,b\n")
            for i, k1 in enumerate(self.axis_t.offsets):
                for j, k2 in enumerate(self.axis_s.offsets):
                    fh.write(f"{k1},{k2},{self.axis_t.b[i] * self.axis_s.b[j]:.17g}\n")


def _solve_axis(order, ring_size):
    offs, vals = bspline_autocorr(order)
    b_offsets, b, tail, sym_min = dual_coeffs_from_autocorr(offs, vals, order, ring_size)
    return DualAxis(order, b_offsets, b, tail, sym_min, ring_size)


def dual_generator(gen, ring_size=64):
    """Dual generator of a tensor B-spline generator.

    Per axis: exact autocorrelation, ring deconvolution, truncation.  The
    reported biorthogonality residual comes from an independent panel-Gauss
    quadrature of <dual, phi(. - j)> over the joint support.
    """
    axis_t = _solve_axis(gen.order_t, ring_size)
    axis_s = axis_t if gen.order_s == gen.order_t else _solve_axis(gen.order_s, ring_size)
    _, it = _biorth_integrals_1d(gen.order_t, axis_t)
    _, is_ = _biorth_integrals_1d(gen.order_s, axis_s)
    prod = np.outer(it, is_)
    target = np.zeros_like(prod)
    target[it.size // 2, is_.size // 2] = 1.0
    residual = float(np.max(np.abs(prod - target)))
    return DualGenerator(gen, axis_t, axis_s, residual)


@dataclass(frozen=True)
class GeneratorInfo:
    """Gram-symbol bounds and amalgam statistics of a generator/dual pair."""

    m: float
    M: float
    amalgam_norm_phi: float
    amalgam_norm_dual: float

    def __post_init__(self):
        if not (0.0 < self.m <= self.M < np.inf):
            raise InputError("Gram-symbol bounds must satisfy 0 < m <= M < inf")


def generator_info(gen, dual, samples_per_unit=64, n_xi=2048):
    """Compute the 2-d Gram-symbol bounds and amalgam norms."""
    xi = np.linspace(0.0, 2.0 * np.pi, n_xi, endpoint=False)

    def symbol(order):
        offs, vals = bspline_autocorr(order)
        return sum(v * np.cos(o * xi) for o, v in zip(offs, vals))

    sym_t = symbol(gen.order_t)
    sym_s = symbol(gen.order_s)
    m = float(sym_t.min() * sym_s.min())
    M = float(sym_t.max() * sym_s.max())
    return GeneratorInfo(m, M, gen.amalgam_norm(samples_per_unit), dual.amalgam_norm(samples_per_unit))
