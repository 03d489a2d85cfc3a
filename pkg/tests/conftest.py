"""Session-scoped fixtures: the default hat stack is expensive enough to share."""

import numpy as np
import pytest

from temrecon import (
    CoefSeq,
    Generator,
    Grid,
    VSignal,
    build_shift_invariant_kernel,
    dual_generator,
    window_for_grid,
)


@pytest.fixture(scope="session")
def hat_gen():
    return Generator(2, 2)


@pytest.fixture(scope="session")
def hat_dual(hat_gen):
    return dual_generator(hat_gen)


@pytest.fixture(scope="session")
def hat_kernel(hat_gen, hat_dual):
    return build_shift_invariant_kernel(hat_gen, hat_dual)


@pytest.fixture(scope="session")
def default_grid():
    return Grid.from_spacing(0.0, 32.0, 0.0, 32.0, 1.0 / 32.0)


@pytest.fixture(scope="session")
def default_window(default_grid, hat_gen):
    return window_for_grid(default_grid, hat_gen)


@pytest.fixture(scope="session")
def small_grid():
    return Grid.from_spacing(0.0, 12.0, 0.0, 12.0, 1.0 / 32.0)


@pytest.fixture(scope="session")
def small_window(small_grid, hat_gen):
    return window_for_grid(small_grid, hat_gen)


def random_vsignal(window, gen, grid, rng, sup=0.8):
    coefs = rng.uniform(-1.0, 1.0, (window.n1, window.n2))
    sig = VSignal(CoefSeq(coefs, window.k1_first, window.k2_first), gen)
    peak = float(np.max(np.abs(sig.render(grid).values)))
    return sig.scaled(sup / peak)


def plain_integrator_oracle(fslice, cfg, horizon):
    """Non-leaky fire times of a piecewise-linear slice by exact quadratic solves.

    Independent of the encoder: marches knot intervals and solves the
    threshold equation of the biased running integral in closed form.
    """
    t0, t_end = horizon
    theta, bias = cfg.theta, cfg.b_level
    knots = np.arange(np.ceil(t0), t_end, 1.0)
    edges = np.unique(np.concatenate([[t0], knots, [t_end]]))
    times = []
    y = 0.0
    pos = t0
    for a, b_edge in zip(edges[:-1], edges[1:]):
        pos = max(pos, a)
        while pos < b_edge - 1e-15:
            fa = float(fslice(np.array([pos]))[0])
            fb = float(fslice(np.array([b_edge]))[0])
            slope = (fb - fa) / (b_edge - pos)
            cc = y - theta
            bb = fa + bias
            aa = 0.5 * slope
            if abs(aa) < 1e-14:
                root = -cc / bb
            else:
                disc = bb * bb - 4 * aa * cc
                root = (-bb + np.sqrt(disc)) / (2 * aa) if disc >= 0 else np.inf
                if root < 0:
                    root = (-bb - np.sqrt(disc)) / (2 * aa)
            t_star = pos + root
            if t_star <= b_edge + 1e-15:
                times.append(t_star)
                y = 0.0
                pos = t_star
            else:
                y += (fa + bias) * (b_edge - pos) + 0.5 * slope * (b_edge - pos) ** 2
                pos = b_edge
    return np.array(times)
