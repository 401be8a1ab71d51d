"""Ready-made test problems with closed-form solutions."""
from __future__ import annotations

import numpy as np

from .forms import ExactSolution, ProblemData
from .geometry import LevelSetInterface

CIRCLE_CENTER = (0.5, 0.5)
CIRCLE_RADIUS = np.sqrt(1.0 / 8.0)


def circle_case(alpha1=10.0, alpha2=1.0):
    """Circle of radius ``sqrt(1/8)`` centred in the unit square.

    ``u1 = exp(x y) / alpha1`` inside and ``u2 = sin(pi x) sin(pi y) / alpha2``
    outside. Neither the solution nor the flux is continuous across the
    circle, so both jump data are non-zero.
    """
    a1, a2 = float(alpha1), float(alpha2)
    pi = np.pi

    def u1(x):
        return np.exp(x[..., 0] * x[..., 1]) / a1

    def grad1(x):
        e = np.exp(x[..., 0] * x[..., 1]) / a1
        return np.stack([x[..., 1] * e, x[..., 0] * e], axis=-1)

    def lap1(x):
        return (x[..., 0] ** 2 + x[..., 1] ** 2) * np.exp(x[..., 0] * x[..., 1]) / a1

    def u2(x):
        return np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1]) / a2

    def grad2(x):
        sx, sy = np.sin(pi * x[..., 0]), np.sin(pi * x[..., 1])
        cx, cy = np.cos(pi * x[..., 0]), np.cos(pi * x[..., 1])
        return np.stack([pi * cx * sy, pi * sx * cy], axis=-1) / a2

    def lap2(x):
        return -2 * pi * pi * u2(x)

    exact = ExactSolution(u1, u2, grad1, grad2, lap1, lap2)
    ls = LevelSetInterface.circle(CIRCLE_CENTER, CIRCLE_RADIUS)
    # u2 vanishes on the outer boundary, which lies entirely in the outer region
    return ls, ProblemData.manufactured(exact, a1, a2, dirichlet=True)


def linear_jump_case(alpha1=1.0, alpha2=2.0, x0=0.5):
    """Straight interface ``x = x0`` with affine solutions on both sides.

    ``u1 = 1 + 2x + 3y`` on the left and ``u2 = -1 + x - 2y`` on the right;
    the discrete space contains both, so every consistent scheme must
    reproduce them exactly.
    """
    a1, a2 = float(alpha1), float(alpha2)
    c1 = np.array([1.0, 2.0, 3.0])
    c2 = np.array([-1.0, 1.0, -2.0])

    def affine(c):
        def u(x):
            return c[0] + c[1] * x[..., 0] + c[2] * x[..., 1]

        def g(x):
            return np.broadcast_to(c[1:], np.shape(x)[:-1] + (2,)).copy()

        return u, g

    u1, g1 = affine(c1)
    u2, g2 = affine(c2)

    def zero(x):
        return np.zeros(np.shape(x)[:-1])

    exact = ExactSolution(u1, u2, g1, g2, zero, zero)
    ls = LevelSetInterface.line((x0, 0.0), (1.0, 0.0))
    return ls, ProblemData.manufactured(exact, a1, a2, dirichlet=True)


def poisson_case(alpha=1.0):
    """No interface: the whole square is side 2 and ``u = sin(pi x) sin(pi y) / alpha``."""
    a = float(alpha)
    pi = np.pi

    def u(x):
        return np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1]) / a

    def grad(x):
        sx, sy = np.sin(pi * x[..., 0]), np.sin(pi * x[..., 1])
        cx, cy = np.cos(pi * x[..., 0]), np.cos(pi * x[..., 1])
        return np.stack([pi * cx * sy, pi * sx * cy], axis=-1) / a

    def lap(x):
        return -2 * pi * pi * u(x)

    exact = ExactSolution(u, u, grad, grad, lap, lap)
    ls = LevelSetInterface.constant(1.0)
    return ls, ProblemData.manufactured(exact, a, a, dirichlet=False)
