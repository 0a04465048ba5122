"""Smooth surrogates of nonsmooth primitives.

Pseudo-Huber approximations (unit steepness) of the absolute value,
Euclidean norm and ramp functions, plus the Fischer-Burmeister
complementarity function with its relaxation parameter.  Everything here
is pure and traceable by JAX, so downstream dynamics and constraint code
can differentiate through these functions.
"""

from dataclasses import dataclass

import jax
import jax.numpy as jnp

__all__ = [
    "SmoothingParams",
    "NonsmoothPointError",
    "smooth_abs",
    "smooth_norm",
    "smooth_relu",
    "fischer_burmeister",
]


class NonsmoothPointError(ValueError):
    """Gradient requested at a point where the function is not differentiable."""


@dataclass(frozen=True)
class SmoothingParams:
    """Smoothing configuration: fixed unit steepness and the homotopy tightness."""

    steepness: float = 1.0
    fb_delta: float = 1.0

    def __post_init__(self):
        if not self.steepness > 0:
            raise ValueError("steepness must be positive")
        if self.fb_delta < 0:
            raise ValueError("fb_delta must be nonnegative")


def smooth_abs(x):
    """Pseudo-Huber |x|: sqrt(x^2 + 1) - 1."""
    return jnp.sqrt(x * x + 1.0) - 1.0


def smooth_norm(v):
    """Pseudo-Huber Euclidean norm of a vector and its gradient.

    Returns ``(sqrt(|v|^2 + 1) - 1, v / sqrt(|v|^2 + 1))``; the gradient
    is well defined (zero) at the origin.
    """
    v = jnp.atleast_1d(jnp.asarray(v, dtype=float))
    r = jnp.sqrt(jnp.dot(v, v) + 1.0)
    return r - 1.0, v / r


def smooth_relu(x):
    """Pseudo-Huber ramp: (x + sqrt(x^2 + 1) - 1) / 2, applied componentwise."""
    x = jnp.asarray(x, dtype=float)
    return 0.5 * (x + jnp.sqrt(x * x + 1.0) - 1.0)


def _all_concrete(*vals):
    return not any(isinstance(v, jax.core.Tracer) for v in vals)


def fischer_burmeister(a, b, delta):
    """Relaxed Fischer-Burmeister function and its partial derivatives.

    ``value = a + b - sqrt(a^2 + b^2 + delta)``.  With ``a, b >= 0`` the
    set ``value <= 0`` relaxes the complementarity condition ``a b = 0``;
    the relaxation tightens as ``delta -> 0``.

    Raises :class:`NonsmoothPointError` when gradients are requested at
    the kink ``a = b = delta = 0``.
    """
    if _all_concrete(a, b, delta):
        if float(delta) < 0:
            raise ValueError("delta must be nonnegative")
        if float(delta) == 0.0 and float(a) == 0.0 and float(b) == 0.0:
            raise NonsmoothPointError(
                "Fischer-Burmeister gradient undefined at the origin with delta=0"
            )
    r = jnp.sqrt(a * a + b * b + delta)
    return a + b - r, 1.0 - a / r, 1.0 - b / r


def _fb_value(a, b, delta):
    """Fischer-Burmeister value only; safe under tracing (no origin check)."""
    return a + b - jnp.sqrt(a * a + b * b + delta)
