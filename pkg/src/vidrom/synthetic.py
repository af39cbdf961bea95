"""Synthetic ground-truth generators: ODE benchmarks and marker rendering.

The double pendulum is two slender rods (rectangle plus semicylindrical caps)
swinging in a plane, hinged at the origin and at the tip of the first rod,
with optional linear (Rayleigh) damping at both joints.  State vectors are
(theta1, theta2, dtheta1, dtheta2), angles measured from the hanging
equilibrium.  All derived constants are recomputed from the primitive masses
and lengths on demand.

The planar Hopf oscillator z' = z (gamma0 + i omega0 + (a + i b) |z|^2) is
realified as (Re z, Im z); for gamma0 > 0 > a its limit cycle radius is
sqrt(-gamma0 / a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import BoundsError, DivergenceError, InputError, ShapeError
from .frames import Frame, FrameSequence
from .tracker import Template, rotate_template


@dataclass(frozen=True)
class DoublePendulumParams:
    """Primitive geometry and damping of the double pendulum (SI units).

    ``m1``/``m2`` are rod masses, ``l1``/``l2`` hinge-to-hinge lengths,
    ``w1``/``w2`` rod widths, ``beta1``/``beta2`` joint damping coefficients.
    """

    m1: float = 0.253
    l1: float = 0.200
    m2: float = 0.114
    l2: float = 0.180
    w1: float = 0.025
    w2: float = 0.025
    beta1: float = 0.002
    beta2: float = 0.002
    g: float = 9.81

    def __post_init__(self):
        for name in ("m1", "l1", "m2", "l2", "w1", "w2", "g"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if self.beta1 < 0 or self.beta2 < 0:
            raise InputError("damping coefficients must be >= 0")

    @staticmethod
    def _rod_inertia(m, l, w):
        # uniform rod: rectangle l x w plus two semicylindrical end caps of
        # radius w/2, masses split by area; inertia about the rod center
        rect_area = l * w
        cap_area = math.pi * (w / 2.0) ** 2 / 2.0
        total = rect_area + 2.0 * cap_area
        m_rect = m * rect_area / total
        m_cap = m * cap_area / total
        i_rect = m_rect * (l * l + w * w) / 12.0
        arm = l / 2.0 + 2.0 * w / (3.0 * math.pi)
        i_caps = 2.0 * m_cap * ((1.0 / 16.0 - 4.0 / (9.0 * math.pi**2)) * w * w + arm * arm)
        return i_rect + i_caps

    @cached_property
    def inertia(self):
        """(I1, I2): rod moments of inertia about their own centers."""
        return (
            self._rod_inertia(self.m1, self.l1, self.w1),
            self._rod_inertia(self.m2, self.l2, self.w2),
        )

    @cached_property
    def energy_constants(self):
        """(A, B, C, D, E) of T = A q1'^2 + B q2'^2 + C q1' q2' cos(q2 - q1),
        V = -D cos q1 - E cos q2."""
        i1, i2 = self.inertia
        a = 0.5 * self.m1 * (self.l1 / 2.0) ** 2 + 0.5 * i1 + 0.5 * self.m2 * self.l1**2
        b = 0.5 * self.m2 * (self.l2 / 2.0) ** 2 + 0.5 * i2
        c = 0.5 * self.m2 * self.l1 * self.l2
        d = (0.5 * self.m1 + self.m2) * self.g * self.l1
        e = 0.5 * self.m2 * self.g * self.l2
        return a, b, c, d, e


def dp_derivatives(state, params: DoublePendulumParams) -> np.ndarray:
    """Time derivative of (theta1, theta2, dtheta1, dtheta2)."""
    t1, t2, v1, v2 = np.asarray(state, dtype=float)
    a, b, c, d, e = params.energy_constants
    b1, b2 = params.beta1, params.beta2
    delta = t1 - t2
    sd, cd = math.sin(delta), math.cos(delta)
    k = c * c * cd * cd - 4.0 * a * b
    acc1 = (
        c * c * sd * cd * v1 * v1
        + 2.0 * b * c * sd * v2 * v2
        + 2.0 * b * d * math.sin(t1)
        - c * e * cd * math.sin(t2)
        + 2.0 * b * ((b1 + b2) * v1 - b2 * v2)
        + c * cd * (b2 * v1 - b2 * v2)
    ) / k
    acc2 = (
        -2.0 * a * c * sd * v1 * v1
        - c * c * sd * cd * v2 * v2
        - c * d * cd * math.sin(t1)
        + 2.0 * a * e * math.sin(t2)
        - 2.0 * a * (b2 * v1 - b2 * v2)
        - c * cd * ((b1 + b2) * v1 - b2 * v2)
    ) / k
    return np.array([v1, v2, acc1, acc2])


def dp_energy(state, params: DoublePendulumParams) -> float:
    """Total mechanical energy T + V at a state."""
    t1, t2, v1, v2 = np.asarray(state, dtype=float)
    a, b, c, d, e = params.energy_constants
    kinetic = a * v1 * v1 + b * v2 * v2 + c * v1 * v2 * math.cos(t2 - t1)
    potential = -d * math.cos(t1) - e * math.cos(t2)
    return float(kinetic + potential)


def dp_tip_position(state, params: DoublePendulumParams):
    """Cartesian tip of the second rod; x right, y up, origin at the pivot."""
    t1, t2 = np.asarray(state, dtype=float)[:2]
    x = params.l1 * math.sin(t1) + params.l2 * math.sin(t2)
    y = -params.l1 * math.cos(t1) - params.l2 * math.cos(t2)
    return np.array([x, y])


@dataclass(frozen=True)
class HopfParams:
    """Coefficients of z' = z (gamma0 + i omega0 + (a + i b) |z|^2)."""

    gamma0: float
    omega0: float
    a: float
    b: float

    @property
    def limit_radius(self):
        """Radius of the circular limit cycle, where gamma0 and a oppose."""
        if self.a == 0 or self.gamma0 * self.a > 0:
            raise InputError("no limit cycle: need gamma0 and a of opposite sign")
        return math.sqrt(-self.gamma0 / self.a)


def hopf_derivatives(state, params: HopfParams) -> np.ndarray:
    """Realified Hopf field on (Re z, Im z)."""
    x, y = np.asarray(state, dtype=float)
    r2 = x * x + y * y
    gr = params.gamma0 + params.a * r2
    om = params.omega0 + params.b * r2
    return np.array([gr * x - om * y, om * x + gr * y])


def integrate(rhs, x0, dt: float, steps: int, bound: float = 1e6) -> np.ndarray:
    """Fixed-step RK4 integration of ``rhs(state) -> derivative``.

    Returns the (steps + 1, len(x0)) trajectory including the initial state.
    Raises DivergenceError when the state leaves ``bound`` or turns non-finite.
    """
    if dt <= 0:
        raise InputError("dt must be positive")
    if steps < 0:
        raise InputError("steps must be >= 0")
    state = np.asarray(x0, dtype=float)
    out = np.empty((steps + 1, state.size))
    out[0] = state
    for i in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(state)) or np.abs(state).max() > bound:
            raise DivergenceError((i + 1) * dt)
        out[i + 1] = state
    return out


def make_textured_marker(size: int = 21, seed: int = 7, channels: int = 1) -> Frame:
    """A disk-shaped marker with seeded random texture.

    The texture breaks rotational symmetry so sweeps can resolve the angle;
    pixels outside the inscribed disk are masked out, which keeps the support
    rotation invariant.
    """
    if size < 3 or size % 2 == 0:
        raise InputError("marker size must be odd and >= 3")
    if channels not in (1, 3):
        raise InputError("channels must be 1 or 3")
    rng = np.random.default_rng(seed)
    img = rng.random((size, size, channels))
    # correlate the texture over a few pixels: per-pixel noise decorrelates
    # under rotation resampling, which would starve the angle sweep of signal
    for _ in range(2):
        img = ndimage.uniform_filter(img, size=(3, 3, 1), mode="nearest")
    lo, hi = float(img.min()), float(img.max())
    img = 0.1 + 0.85 * (img - lo) / (hi - lo)
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    mask = (xx - c) ** 2 + (yy - c) ** 2 <= c * c + 1e-9
    return Frame(img, mask=mask)


def render_marker_video(
    xs, ys, thetas, marker: Frame, canvas_size, frame_rate: float,
    background=0.5,
) -> FrameSequence:
    """Composite a marker onto a canvas at integer positions per frame.

    ``xs``/``ys`` give the marker anchor (its center) in canvas pixels and
    must be integer valued; round beforehand and keep the rounded values as
    the ground truth.  ``thetas`` are rotation angles in degrees, applied with the
    same resampling convention the tracker uses.  ``background`` is either a
    constant gray level or a Frame of the canvas size.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    if not (xs.shape == ys.shape == thetas.shape) or xs.ndim != 1:
        raise ShapeError("xs, ys, thetas must be equal-length 1-d arrays")
    if np.any(np.abs(xs - np.rint(xs)) > 1e-9) or np.any(np.abs(ys - np.rint(ys)) > 1e-9):
        raise InputError("marker positions must be integer pixels")
    cw, ch = int(canvas_size[0]), int(canvas_size[1])
    if isinstance(background, Frame):
        if background.width != cw or background.height != ch:
            raise ShapeError("background frame does not match the canvas size")
        base = background.intensities
        if base.shape[2] != marker.channels:
            raise ShapeError("background and marker channel counts differ")
    else:
        base = np.full((ch, cw, marker.channels), float(background))
    template = Template(marker)
    frames = []
    for i in range(xs.size):
        rt = template if thetas[i] == 0.0 else rotate_template(template, thetas[i])
        ax, ay = rt.anchor
        x0 = int(round(xs[i] - ax))
        y0 = int(round(ys[i] - ay))
        if x0 < 0 or y0 < 0 or x0 + rt.width > cw or y0 + rt.height > ch:
            raise BoundsError(f"frame {i}: marker leaves the canvas")
        img = base.copy()
        patch = img[y0 : y0 + rt.height, x0 : x0 + rt.width]
        valid = rt.mask
        patch[valid] = rt.pixels.intensities[valid]
        frames.append(Frame(img))
    return FrameSequence(tuple(frames), frame_rate)
