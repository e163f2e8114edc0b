"""Parameters, jump kernel, and exact samplers for the isotropic stable process.

All samplers take an explicit ``numpy.random.Generator`` and are pure given
that stream, so callers may run many workers as long as each worker owns its
own generator.
"""

import dataclasses

import numpy as np
from scipy.special import betaincinv, gamma as _gamma


class StableParamsError(ValueError):
    """Invalid dimension or stability index."""


@dataclasses.dataclass(frozen=True)
class StableParams:
    """Dimension and stability index of the isotropic stable process.

    Parameters
    ----------
    d : int
        Space dimension, at least 1.
    alpha : float
        Stability index, strictly between 0 and 2.

    Attributes
    ----------
    c_levy : float
        Constant in the jump kernel ``c_levy * |x-y|**(-d-alpha)``.
    """

    d: int
    alpha: float
    c_levy: float = dataclasses.field(init=False)

    def __post_init__(self):
        if not (isinstance(self.d, (int, np.integer)) and self.d >= 1):
            raise StableParamsError("dimension d must be a positive integer, got %r" % (self.d,))
        if not (0.0 < self.alpha < 2.0):
            raise StableParamsError("stability index alpha must lie in (0, 2), got %r" % (self.alpha,))
        object.__setattr__(self, "c_levy", levy_constant(self.d, self.alpha))


def levy_constant(d, alpha):
    """Constant of the isotropic stable jump kernel.

    Returns ``2**alpha * Gamma((d+alpha)/2) / (pi**(d/2) * |Gamma(-alpha/2)|)``.
    """
    if not (0.0 < alpha < 2.0):
        raise StableParamsError("stability index alpha must lie in (0, 2), got %r" % (alpha,))
    if d < 1:
        raise StableParamsError("dimension d must be positive, got %r" % (d,))
    return (
        2.0 ** alpha
        * _gamma((d + alpha) / 2.0)
        / (np.pi ** (d / 2.0) * abs(_gamma(-alpha / 2.0)))
    )


def levy_density(params, x, y):
    """Jump density ``c_levy * |x-y|**(-d-alpha)``; symmetric in (x, y).

    ``x`` and ``y`` are scalars for d=1, else arrays whose last axis has
    length d. Raises on coincident points (the kernel is singular there).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if params.d == 1 and x.ndim == y.ndim and (x.ndim == 0 or x.shape[-1] != params.d):
        r = np.abs(x - y)
    else:
        r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("levy_density is singular at x == y")
    return params.c_levy * r ** (-params.d - params.alpha)


def levy_interval_mass(params, x, a, b):
    """Exact ``integral of c|x-z|**(-1-alpha) dz`` over (a, b), d=1 only.

    The interval may be unbounded (``a=-inf`` or ``b=inf``) but must not
    contain ``x``. Inputs broadcast; vectorised over ``x``.
    """
    if params.d != 1:
        raise ValueError("closed-form interval masses are d=1 only")
    x = np.asarray(x, dtype=float)
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    if np.any(b < a):
        raise ValueError("empty interval: b < a")
    if np.any((np.minimum(a, b) - x < 0) & (np.maximum(a, b) - x > 0)):
        raise ValueError("interval must not contain the base point x")
    al = params.alpha
    scale = params.c_levy / al

    def _pot(u):
        # antiderivative magnitude |u|**(-alpha) with the convention inf -> 0
        out = np.where(np.isinf(u), 0.0, np.abs(np.where(np.isinf(u), 1.0, u)) ** (-al))
        return out

    lo = np.abs(np.where(a >= x, a - x, b - x))   # distance of the near endpoint
    hi_arg = np.where(a >= x, b - x, a - x)
    near = np.where(lo == 0.0, np.inf, lo ** (-al))
    far = _pot(hi_arg)
    return scale * (near - far)


def sample_stable_increment(params, dt, rng, size=None):
    """One increment of the isotropic stable process over time ``dt``.

    The law has characteristic function ``exp(-dt * |xi|**alpha)``; by
    self-similarity the output equals ``dt**(1/alpha)`` times a unit-time
    increment in distribution. For d=1 the exact trigonometric transform is
    used (with a dedicated Cauchy branch at alpha=1); for d>=2 the increment
    is built as Brownian motion subordinated by a one-sided stable time.

    Returns a scalar/(size,) array for d=1, a (d,)/(size, d) array otherwise.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = 1 if size is None else int(size)
    al = params.alpha
    if params.d == 1:
        u = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=n)
        if al == 1.0:
            x = np.tan(u)
        else:
            e = rng.standard_exponential(size=n)
            x = (np.sin(al * u) / np.cos(u) ** (1.0 / al)) * (
                np.cos((1.0 - al) * u) / e
            ) ** ((1.0 - al) / al)
        out = dt ** (1.0 / al) * x
        return out[0] if size is None else out
    s = _one_sided_stable(al / 2.0, rng, n) * dt ** (2.0 / al)
    g = rng.standard_normal(size=(n, params.d))
    out = np.sqrt(2.0 * s)[:, None] * g
    return out[0] if size is None else out


def _one_sided_stable(rho, rng, n):
    """Positive rho-stable variates with Laplace transform exp(-lam**rho)."""
    u = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=n)
    e = rng.standard_exponential(size=n)
    th = rho * (u + np.pi / 2.0)
    return (np.sin(th) / np.cos(u) ** (1.0 / rho)) * (np.cos(u - th) / e) ** ((1.0 - rho) / rho)


def sample_ball_exit_radius(params, rng, size=None):
    """Exit radii (in units of the ball radius) for a start at the center.

    The squared reciprocal radius is Beta(alpha/2, 1-alpha/2) distributed;
    sampling inverts the regularized incomplete beta function, so the draw
    is an exact inverse transform of one uniform.
    """
    n = 1 if size is None else int(size)
    al = params.alpha
    t = betaincinv(al / 2.0, 1.0 - al / 2.0, rng.random(size=n))
    rho = 1.0 / np.sqrt(t)
    return rho[0] if size is None else rho


def _unit_direction(d, rng, n):
    if d == 1:
        return rng.integers(0, 2, size=n) * 2.0 - 1.0
    g = rng.standard_normal(size=(n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ball_exit_position(params, center, radius, start, rng, size=None):
    """Exact sample of the stable exit position from an open ball.

    For a start at the center the exit point is ``radius * rho * direction``
    with the closed-form radial law and a uniform direction. For other
    interior starts the exit law is realised by iterating exits from maximal
    centered sub-balls (strong Markov property), which terminates almost
    surely. The returned points lie strictly outside the closed ball.
    """
    d = params.d
    center = np.atleast_1d(np.asarray(center, dtype=float))
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if radius <= 0:
        raise ValueError("radius must be positive")
    gap = radius - np.linalg.norm(start - center)
    if gap <= 0:
        raise ValueError("start must lie strictly inside the ball")
    n = 1 if size is None else int(size)
    pos = np.tile(start, (n, 1))
    active = np.ones(n, dtype=bool)
    # distance to the sphere bounds the centered sub-ball radius at each step
    for _ in range(1000000):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        cur = pos[idx]
        sub_r = radius - np.linalg.norm(cur - center, axis=1)
        rho = sample_ball_exit_radius(params, rng, size=idx.size)
        direction = _unit_direction(d, rng, idx.size)
        if d == 1:
            step = (sub_r * rho * direction)[:, None]
        else:
            step = (sub_r * rho)[:, None] * direction
        cur = cur + step
        pos[idx] = cur
        active[idx] = np.linalg.norm(cur - center, axis=1) < radius
    else:
        raise RuntimeError("ball exit iteration cap exceeded (geometry bug?)")
    if d == 1:
        out = pos[:, 0]
        return out[0] if size is None else out
    return pos[0] if size is None else pos


def ball_mean_exit_time(params, radius, start_offset):
    """Expected exit time from a ball of the given radius.

    ``start_offset`` is the distance of the start point from the center and
    must be smaller than the radius. Vectorised over ``start_offset``.
    """
    off = np.asarray(start_offset, dtype=float)
    if np.any(off >= radius):
        raise ValueError("start must lie strictly inside the ball")
    d, al = params.d, params.alpha
    num = _gamma(d / 2.0) * (radius ** 2 - off ** 2) ** (al / 2.0)
    den = 2.0 ** al * _gamma(1.0 + al / 2.0) * _gamma((d + al) / 2.0)
    return num / den
