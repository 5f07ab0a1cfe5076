"""
Analytic test functions (phantoms) with closed-form transforms.

Kinds:
- IntervalIndicator(a, b): indicator of [a, b] on the line
- Hat(center, halfwidth): unit-height triangle on the line
- Disk(radius, center, amplitude): weighted disk indicator in the plane
- PhantomSum: sum of phantoms of one dimension

Fourier transforms use the convention
    v_hat(p) = (2 pi)^{-d} int exp(i p.q) v(q) dq.
"""

import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy.special import j1


# ============================================================================
# Phantom Kinds
# ============================================================================

@dataclass(frozen=True)
class IntervalIndicator:
    a: float
    b: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"Interval needs a < b, got [{self.a}, {self.b}]")


@dataclass(frozen=True)
class Hat:
    center: float
    halfwidth: float
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if self.halfwidth <= 0.0:
            raise ValueError(f"Hat halfwidth must be > 0, got {self.halfwidth}")


@dataclass(frozen=True)
class Disk:
    radius: float
    center: Tuple[float, float] = (0.0, 0.0)
    amplitude: float = 1.0
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"Disk radius must be > 0, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))


@dataclass(frozen=True)
class PhantomSum:
    components: Tuple["Phantom", ...]
    dim: int = field(init=False)

    def __post_init__(self):
        if not self.components:
            raise ValueError("PhantomSum needs at least one component")
        dims = {part.dim for part in self.components}
        if len(dims) != 1:
            raise ValueError(f"PhantomSum components mix dimensions {sorted(dims)}")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "dim", dims.pop())


Phantom = Union[IntervalIndicator, Hat, Disk, PhantomSum]


# ============================================================================
# Closed Forms
# ============================================================================

def _points_2d(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError(f"2D points need a trailing axis of length 2, got shape {p.shape}")
    return p


def fourier(phantom: Phantom, p) -> np.ndarray:
    """
    Fourier transform v_hat(p) with the (2 pi)^{-d} normalization.

    Args:
        phantom: Any phantom.
        p: Frequencies; shape (...) in 1D, (..., 2) in 2D.

    Returns:
        Complex array (scalar-shaped input gives a 0-d array).
    """
    if isinstance(phantom, PhantomSum):
        return sum(fourier(part, p) for part in phantom.components)

    if isinstance(phantom, IntervalIndicator):
        p = np.asarray(p, dtype=float)
        length = phantom.b - phantom.a
        middle = 0.5 * (phantom.a + phantom.b)
        return np.exp(1j * p * middle) * length * np.sinc(p * length / (2 * math.pi)) / (2 * math.pi)

    if isinstance(phantom, Hat):
        p = np.asarray(p, dtype=float)
        h = phantom.halfwidth
        return np.exp(1j * p * phantom.center) * h * np.sinc(p * h / (2 * math.pi)) ** 2 / (2 * math.pi)

    if isinstance(phantom, Disk):
        p = _points_2d(p)
        a = phantom.radius
        modulus = np.hypot(p[..., 0], p[..., 1])
        safe = np.where(modulus > 0.0, modulus, 1.0)
        radial = np.where(modulus > 0.0, a * j1(a * safe) / (2 * math.pi * safe), a * a / (4 * math.pi))
        phase = np.exp(1j * (p[..., 0] * phantom.center[0] + p[..., 1] * phantom.center[1]))
        return phantom.amplitude * phase * radial

    raise TypeError(f"Unknown phantom kind: {type(phantom).__name__}")


def radon(phantom: Phantom, y, phi) -> np.ndarray:
    """
    Radon transform R[v](y, theta) with theta = (cos phi, sin phi).

    Args:
        phantom: A 2D phantom.
        y: Offsets, broadcast against phi.
        phi: Angles in radians.

    Raises:
        ValueError: For 1D phantoms.
    """
    if phantom.dim != 2:
        raise ValueError("Radon transform is defined for 2D phantoms only")
    if isinstance(phantom, PhantomSum):
        return sum(radon(part, y, phi) for part in phantom.components)

    y = np.asarray(y, dtype=float)
    phi = np.asarray(phi, dtype=float)
    shift = phantom.center[0] * np.cos(phi) + phantom.center[1] * np.sin(phi)
    chord = phantom.radius ** 2 - (y - shift) ** 2
    return phantom.amplitude * 2.0 * np.sqrt(np.clip(chord, 0.0, None))


def evaluate(phantom: Phantom, points) -> np.ndarray:
    """Spatial values v(q); points of shape (...) in 1D or (..., 2) in 2D."""
    if isinstance(phantom, PhantomSum):
        return sum(evaluate(part, points) for part in phantom.components)

    if isinstance(phantom, IntervalIndicator):
        q = np.asarray(points, dtype=float)
        return ((q >= phantom.a) & (q <= phantom.b)).astype(float)

    if isinstance(phantom, Hat):
        q = np.asarray(points, dtype=float)
        return np.clip(1.0 - np.abs(q - phantom.center) / phantom.halfwidth, 0.0, None)

    if isinstance(phantom, Disk):
        q = _points_2d(points)
        distance = np.hypot(q[..., 0] - phantom.center[0], q[..., 1] - phantom.center[1])
        return phantom.amplitude * (distance <= phantom.radius).astype(float)

    raise TypeError(f"Unknown phantom kind: {type(phantom).__name__}")


def support_radius(phantom: Phantom) -> float:
    """Radius of the smallest origin-centred ball containing the support."""
    if isinstance(phantom, PhantomSum):
        return max(support_radius(part) for part in phantom.components)
    if isinstance(phantom, IntervalIndicator):
        return max(abs(phantom.a), abs(phantom.b))
    if isinstance(phantom, Hat):
        return abs(phantom.center) + phantom.halfwidth
    if isinstance(phantom, Disk):
        return math.hypot(*phantom.center) + phantom.radius
    raise TypeError(f"Unknown phantom kind: {type(phantom).__name__}")


def smoothness_index(phantom: Phantom) -> float:
    """Supremum of the Sobolev indices nu with v in H^nu."""
    if isinstance(phantom, PhantomSum):
        return min(smoothness_index(part) for part in phantom.components)
    if isinstance(phantom, Hat):
        return 1.5
    if isinstance(phantom, (IntervalIndicator, Disk)):
        return 0.5
    raise TypeError(f"Unknown phantom kind: {type(phantom).__name__}")


def check_support(phantom: Phantom, sigma: float) -> None:
    """
    Raises:
        ValueError: If the support is not strictly inside the ball of radius sigma.
    """
    radius = support_radius(phantom)
    if radius >= sigma:
        raise ValueError(f"Phantom support radius {radius:g} is not inside B_sigma, sigma={sigma:g}")


# ============================================================================
# Named Phantoms
# ============================================================================

PHANTOM_NAMES = ("hat", "indicator", "disk", "two_disks")


def named_phantom(name: str, sigma: float = 1.0) -> Phantom:
    """
    Standard phantoms scaled to a support radius sigma.

    Args:
        name: One of PHANTOM_NAMES.
        sigma: Support radius; every phantom sits well inside B_sigma.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if name == "hat":
        return Hat(center=0.0, halfwidth=0.5 * sigma)
    if name == "indicator":
        return IntervalIndicator(a=-0.5 * sigma, b=0.5 * sigma)
    if name == "disk":
        return Disk(radius=0.5 * sigma)
    if name == "two_disks":
        return PhantomSum((
            Disk(radius=0.3 * sigma, center=(-0.3 * sigma, 0.1 * sigma)),
            Disk(radius=0.2 * sigma, center=(0.4 * sigma, -0.2 * sigma), amplitude=0.5),
        ))
    raise ValueError(f"Unknown phantom '{name}', expected one of {', '.join(PHANTOM_NAMES)}")


def describe(phantom: Phantom) -> dict:
    """JSON-friendly description used in reports."""
    if isinstance(phantom, PhantomSum):
        return {"kind": "sum", "components": [describe(part) for part in phantom.components]}
    if isinstance(phantom, IntervalIndicator):
        return {"kind": "interval_indicator", "a": phantom.a, "b": phantom.b}
    if isinstance(phantom, Hat):
        return {"kind": "hat", "center": phantom.center, "halfwidth": phantom.halfwidth}
    if isinstance(phantom, Disk):
        return {
            "kind": "disk",
            "radius": phantom.radius,
            "center": list(phantom.center),
            "amplitude": phantom.amplitude,
        }
    raise TypeError(f"Unknown phantom kind: {type(phantom).__name__}")
