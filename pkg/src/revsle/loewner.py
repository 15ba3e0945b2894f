"""Forward and backward chordal Loewner evolutions from exact slit maps.

With the driving held constant on each grid step, the chordal Loewner ODE
    dg = +2 dt / (g - xi)     (forward,  H minus growing hull -> H)
    dg = -2 dt / (g - xi)     (backward, H -> H minus growing slit)
integrates in closed form over one step of length dt:

    forward   w -> xi + sqrt((w - xi)^2 + 4 dt)
    backward  w -> xi + sqrt((w - xi)^2 - 4 dt)

The square root branch is fixed by two conditions: the image has
non-negative imaginary part, and the map is asymptotic to the identity at
infinity (the real part of the root carries the sign of Re(w - xi)).  It is
implemented with explicit real/imaginary formulas in :func:`slit_sqrt`
rather than a library principal branch, so there is no cut crossing next to
the slit.

A whole-plane-type radial flow on the upper half-plane,

    dg = -(1 + g^2)/2 * (1 + eta*g)/(g - eta) dt,   eta = tan(xi),

has no closed one-step solution and is integrated explicitly with adaptive
sub-stepping (:func:`evolve_wholeplane`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .driving import DrivingPath

__all__ = [
    "SwallowedPointError",
    "BranchViolationError",
    "TanPoleError",
    "slit_sqrt",
    "slit_sqrt_vec",
    "ElementaryMap",
    "LoewnerEvolution",
    "evolve_forward",
    "evolve_backward",
    "apply_map",
    "apply_derivative",
    "invert_map",
    "trace",
    "RadialEvolution",
    "evolve_wholeplane",
    "compose_forward_backward",
    "evolution_to_json",
]

# Points whose slit-map discriminant (w-xi)^2 +- 4dt falls within this of the
# degenerate configuration are treated as absorbed / invalid.
EPS_SWALLOW = 1e-12
# tan poles: drivers with |xi mod pi - pi/2| below this abort a radial run.
EPS_POLE = 1e-8

_STEP_FRACTION = 1e-3     # radial sub-step control: |dg| <= 1e-3 |g - eta|
_MAX_SUBSTEPS = 200_000   # per grid step; exceeded -> trajectory halts "stiff"
_ESCAPE_RADIUS = 1e8


class SwallowedPointError(Exception):
    """A forward orbit hit the driving singularity (point absorbed by the hull)."""

    def __init__(self, step: int, point: complex):
        self.step = step
        self.point = point
        super().__init__(f"point {point} swallowed at step {step}")


class BranchViolationError(Exception):
    """An inverse orbit left the domain where the branch is defined."""

    def __init__(self, step: int, point: complex):
        self.step = step
        self.point = point
        super().__init__(f"branch violation at step {step}, point {point}")


class TanPoleError(Exception):
    """A radial driver landed within EPS_POLE of a pole of tan."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"driving value {value} at index {index} is at a tan pole")


def slit_sqrt(u: complex, re_hint: float) -> complex:
    """Square root of u with Im >= 0; for real u >= 0 the sign of the real
    part follows ``re_hint`` (the sign of Re(w - xi), identity at infinity).

    When Im(u) != 0 there is exactly one root with positive imaginary part,
    so the hint only breaks the tie on the real axis.
    """
    a = u.real
    b = u.imag
    m = math.hypot(a, b)
    re = math.sqrt(max(m + a, 0.0) * 0.5)
    im = math.sqrt(max(m - a, 0.0) * 0.5)
    if b > 0.0:
        return complex(re, im)
    if b < 0.0:
        return complex(-re, im)
    if a >= 0.0:
        return complex(re if re_hint >= 0.0 else -re, 0.0)
    return complex(0.0, im)


def slit_sqrt_vec(u: np.ndarray, re_hint: np.ndarray) -> np.ndarray:
    """Vectorized :func:`slit_sqrt` (complex128 arrays)."""
    a = u.real
    b = u.imag
    m = np.hypot(a, b)
    re = np.sqrt(np.maximum(m + a, 0.0) * 0.5)
    im = np.sqrt(np.maximum(m - a, 0.0) * 0.5)
    sign = np.where(b > 0.0, 1.0,
                    np.where(b < 0.0, -1.0,
                             np.where(re_hint >= 0.0, 1.0, -1.0)))
    return sign * re + 1j * im


def _forward_swallowed(v: complex, four_dt: float) -> bool:
    # v = w - xi.  The one-step forward orbit hits the singularity iff v is
    # purely imaginary with |v|^2 <= 4dt (the point sits on the closed slit);
    # the tip itself has discriminant v^2 + 4dt = 0.
    if abs(v) <= EPS_SWALLOW:
        return True
    if abs(v.real) <= EPS_SWALLOW and v.imag * v.imag <= four_dt:
        return True
    return abs(v * v + four_dt) <= EPS_SWALLOW


@dataclass(frozen=True)
class ElementaryMap:
    """Exact one-step slit map with the driving held at ``xi``."""

    xi: float
    dt: float
    direction: str  # "forward" | "backward"

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")

    def _disc(self, w: complex) -> tuple[complex, complex]:
        v = w - self.xi
        four_dt = 4.0 * self.dt
        if self.direction == "forward":
            if _forward_swallowed(v, four_dt):
                raise SwallowedPointError(0, w)
            return v, v * v + four_dt
        return v, v * v - four_dt

    def apply(self, w: complex) -> complex:
        v, u = self._disc(w)
        return self.xi + slit_sqrt(u, v.real)

    def derivative(self, w: complex) -> complex:
        v, u = self._disc(w)
        s = slit_sqrt(u, v.real)
        if s == 0.0:
            raise BranchViolationError(0, w)
        return v / s

    def invert(self, w: complex) -> complex:
        v = w - self.xi
        four_dt = 4.0 * self.dt
        if self.direction == "forward":
            u = v * v - four_dt
        else:
            if _forward_swallowed(v, four_dt):
                raise BranchViolationError(0, w)
            u = v * v + four_dt
        return self.xi + slit_sqrt(u, v.real)


@dataclass(frozen=True, eq=False)
class LoewnerEvolution:
    """Composition of elementary slit maps, one per grid step.

    ``driving_values`` are the n+1 grid values of the driving; step k holds
    the value at its left endpoint.  An empty chain is the identity.
    Instances are immutable; evaluation at distinct points is freely
    concurrent.
    """

    direction: str
    driving_values: np.ndarray
    dt: float
    kappa: float
    source: Optional[DrivingPath] = None

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"unknown direction {self.direction!r}")
        vals = np.asarray(self.driving_values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "driving_values", vals)
        object.__setattr__(self, "_xi", tuple(float(x) for x in vals[:-1]))

    @property
    def n_steps(self) -> int:
        return len(self.driving_values) - 1

    def steps(self) -> tuple[ElementaryMap, ...]:
        return tuple(ElementaryMap(x, self.dt, self.direction) for x in self._xi)


def evolve_forward(path: DrivingPath) -> LoewnerEvolution:
    """Forward chain for the given driving (one exact slit map per step)."""
    return LoewnerEvolution("forward", path.values, path.grid.dt, path.kappa, path)


def evolve_backward(path: DrivingPath) -> LoewnerEvolution:
    """Backward chain: maps H into H minus a growing slit."""
    return LoewnerEvolution("backward", path.values, path.grid.dt, path.kappa, path)


def _resolve_steps(evo: LoewnerEvolution, up_to: Optional[int]) -> int:
    n = evo.n_steps
    if up_to is None:
        return n
    if not 0 <= up_to <= n:
        raise ValueError(f"up_to must be in [0, {n}], got {up_to}")
    return up_to


def apply_map(evo: LoewnerEvolution, z: complex, up_to: Optional[int] = None) -> complex:
    """Image of z under the first ``up_to`` steps (default: all).

    Forward direction raises :class:`SwallowedPointError` when the orbit hits
    the driving singularity.
    """
    z = complex(z)
    if z.imag < 0.0:
        raise ValueError(f"point {z} is below the real axis")
    k_max = _resolve_steps(evo, up_to)
    xi = evo._xi
    four_dt = 4.0 * evo.dt
    w = z
    if evo.direction == "forward":
        for k in range(k_max):
            x = xi[k]
            v = w - x
            if _forward_swallowed(v, four_dt):
                raise SwallowedPointError(k, w)
            w = x + slit_sqrt(v * v + four_dt, v.real)
    else:
        for k in range(k_max):
            x = xi[k]
            v = w - x
            w = x + slit_sqrt(v * v - four_dt, v.real)
    return w


def apply_derivative(evo: LoewnerEvolution, z: complex,
                     up_to: Optional[int] = None) -> complex:
    """Derivative of the composed map at z (chain rule over the orbit)."""
    z = complex(z)
    if z.imag < 0.0:
        raise ValueError(f"point {z} is below the real axis")
    k_max = _resolve_steps(evo, up_to)
    xi = evo._xi
    four_dt = 4.0 * evo.dt
    forward = evo.direction == "forward"
    w = z
    d = complex(1.0, 0.0)
    for k in range(k_max):
        x = xi[k]
        v = w - x
        if forward:
            if _forward_swallowed(v, four_dt):
                raise SwallowedPointError(k, w)
            s = slit_sqrt(v * v + four_dt, v.real)
        else:
            s = slit_sqrt(v * v - four_dt, v.real)
            if s == 0.0:
                raise BranchViolationError(k, w)
        d *= v / s
        w = x + s
    return d


def invert_map(evo: LoewnerEvolution, w: complex,
               down_from: Optional[int] = None) -> complex:
    """Preimage of w under the first ``down_from`` steps (default: all).

    Elementary inverses are applied in reverse order; inverting a backward
    chain raises :class:`BranchViolationError` when an intermediate point
    falls outside the image domain (on a step's slit).
    """
    w = complex(w)
    k_max = _resolve_steps(evo, down_from)
    xi = evo._xi
    four_dt = 4.0 * evo.dt
    if evo.direction == "forward":
        for k in range(k_max - 1, -1, -1):
            x = xi[k]
            v = w - x
            w = x + slit_sqrt(v * v - four_dt, v.real)
    else:
        for k in range(k_max - 1, -1, -1):
            x = xi[k]
            v = w - x
            if _forward_swallowed(v, four_dt):
                raise BranchViolationError(k, w)
            w = x + slit_sqrt(v * v + four_dt, v.real)
    return w


def trace(evo: LoewnerEvolution, indices: Optional[Iterable[int]] = None) -> np.ndarray:
    """Curve tip samples gamma_k = g_k^{-1}(xi_k) for a forward evolution
    (zipper evaluation).  Unresolved tips are reported as nan+nan*1j."""
    if evo.direction != "forward":
        raise ValueError("trace is defined for forward evolutions")
    vals = evo.driving_values
    four_dt = 4.0 * evo.dt
    if indices is None:
        indices = range(evo.n_steps + 1)
    out = []
    for k in indices:
        if not 0 <= k <= evo.n_steps:
            raise ValueError(f"step index {k} out of range")
        w = complex(vals[k], 0.0)
        for j in range(k - 1, -1, -1):
            x = vals[j]
            v = w - x
            w = x + slit_sqrt(v * v - four_dt, v.real)
        if not (math.isfinite(w.real) and math.isfinite(w.imag)):
            w = complex(float("nan"), float("nan"))
        out.append(w)
    return np.array(out, dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class RadialEvolution:
    """States of the radial flow at grid times, up to an optional halt.

    ``states[k]`` is g at grid time k; retained states satisfy Im g >= 0.
    ``status`` is "completed", or the reason the trajectory halted:
    "singularity" (within eps_sing of the driving point), "exited"
    (sub-step left the closed upper half-plane), "escaped" (|g| too large),
    or "stiff" (sub-step budget exhausted).
    """

    states: np.ndarray
    path: DrivingPath
    status: str
    halted_step: Optional[int]
    eps_sing: float

    @property
    def completed(self) -> bool:
        return self.status == "completed"


def evolve_wholeplane(path: DrivingPath, eps_sing: float = 1e-6,
                      z0: complex = 1j) -> RadialEvolution:
    """Integrate dg = -(1+g^2)/2 * (1+eta*g)/(g-eta) dt with eta = tan(xi).

    Explicit Euler with per-step subdivision: each sub-step moves g by at
    most 1e-3 * |g - eta|, which controls the stiffness near the moving
    singularity.  A trajectory halts (with status) instead of crossing the
    real axis or touching the singularity.
    """
    z0 = complex(z0)
    if not z0.imag > 0.0:
        raise ValueError(f"initial point {z0} must be in the open upper half-plane")
    vals = path.values
    # refuse drivers that sit on a pole of tan
    res = np.mod(vals, math.pi)
    bad = np.nonzero(np.abs(res - math.pi / 2.0) < EPS_POLE)[0]
    if bad.size:
        raise TanPoleError(int(bad[0]), float(vals[bad[0]]))

    dt = path.grid.dt
    g = z0
    states = [g]
    status = "completed"
    halted = None
    for k in range(path.grid.n_steps):
        eta = math.tan(float(vals[k]))
        remaining = dt
        substeps = 0
        while remaining > 0.0:
            d = g - eta
            ad = abs(d)
            if ad < eps_sing:
                status, halted = "singularity", k
                break
            if abs(g) > _ESCAPE_RADIUS:
                status, halted = "escaped", k
                break
            f = -0.5 * (1.0 + g * g) * (1.0 + eta * g) / d
            af = abs(f)
            if af == 0.0:
                break  # fixed point; rest of the step is a no-op
            h = min(remaining, _STEP_FRACTION * ad / af)
            g = g + h * f
            remaining -= h
            if g.imag < 0.0:
                status, halted = "exited", k
                break
            substeps += 1
            if substeps > _MAX_SUBSTEPS:
                status, halted = "stiff", k
                break
        if halted is not None:
            break
        states.append(g)
    return RadialEvolution(np.array(states, dtype=np.complex128), path,
                           status, halted, eps_sing)


def compose_forward_backward(path1: DrivingPath, path2: DrivingPath,
                             z: complex, up_to: Optional[int] = None) -> complex:
    """Image of z under backward(path1) o forward(path2), both advanced on
    the same grid.  The two drivings may be independent or identical."""
    if (path1.grid.n_steps != path2.grid.n_steps
            or path1.grid.horizon != path2.grid.horizon):
        raise ValueError("drivings must share the time grid")
    w = apply_map(evolve_forward(path2), z, up_to)
    return apply_map(evolve_backward(path1), w, up_to)


def evolution_to_json(evo: LoewnerEvolution) -> dict:
    horizon = (evo.source.grid.horizon if evo.source is not None
               else evo.dt * evo.n_steps)
    return {
        "kappa": evo.kappa,
        "direction": evo.direction,
        "T": horizon,
        "n_steps": evo.n_steps,
        "seed": evo.source.seed if evo.source is not None else None,
    }
