"""Lie algebra and group kernels for so(3) and se(3).

Algebra elements are kept as coordinate vectors: shape (..., 3) for so(3),
shape (..., 6) for se(3) with the rotational half first.  They are embedded
into matrices only at API boundaries, which keeps brackets exact and cheap.
All functions broadcast over leading axes.
"""
from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple

import numpy as np

# Bernoulli numbers with the B_1 = -1/2 convention, exact through B_10.
BERNOULLI = tuple(
    float(b)
    for b in (
        Fraction(1),
        Fraction(-1, 2),
        Fraction(1, 6),
        Fraction(0),
        Fraction(-1, 30),
        Fraction(0),
        Fraction(1, 42),
        Fraction(0),
        Fraction(-1, 30),
        Fraction(0),
        Fraction(5, 66),
    )
)

# Below this angle the trig coefficient ratios switch to 4-term Taylor
# series; truncation error is < 1e-18, far below round-off.
SMALL_ANGLE = 1e-4


class SE3(NamedTuple):
    """SE(3) group element: rotation matrix ``s`` and translation ``rho``."""

    s: np.ndarray
    rho: np.ndarray


def hat(v):
    """Map a 3-vector to the antisymmetric matrix with hat(v) @ z = v x z."""
    v = np.asarray(v, dtype=float)
    m = np.zeros(v.shape[:-1] + (3, 3))
    m[..., 0, 1] = -v[..., 2]
    m[..., 0, 2] = v[..., 1]
    m[..., 1, 0] = v[..., 2]
    m[..., 1, 2] = -v[..., 0]
    m[..., 2, 0] = -v[..., 1]
    m[..., 2, 1] = v[..., 0]
    return m


def vee(m):
    """Inverse of :func:`hat`."""
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def bracket(a, b):
    """Lie bracket in coordinates; so(3) and se(3) supported.

    For 3-vectors this is the cross product.  For 6-vectors (theta, zeta)
    it is (theta_a x theta_b, theta_a x zeta_b - theta_b x zeta_a), the
    commutator of the embedded 4x4 matrices.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"mixed algebras: got coordinate sizes {a.shape[-1]} and {b.shape[-1]}"
        )
    if a.shape[-1] == 3:
        return np.cross(a, b)
    if a.shape[-1] == 6:
        ta, za = a[..., :3], a[..., 3:]
        tb, zb = b[..., :3], b[..., 3:]
        return np.concatenate(
            [np.cross(ta, tb), np.cross(ta, zb) - np.cross(tb, za)], axis=-1
        )
    raise ValueError(f"unsupported algebra dimension {a.shape[-1]}")


def _sin_x_over_x(x):
    # sin(x)/x with a series branch at small x.
    small = x < SMALL_ANGLE
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = 1.0 - (x2 / 6.0) * (1.0 - (x2 / 20.0) * (1.0 - x2 / 42.0))
    return np.where(small, series, np.sin(xs) / xs)


def _one_minus_cos_over_x2(x):
    # (1 - cos x)/x^2 with a series branch at small x.
    small = x < SMALL_ANGLE
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = 0.5 * (1.0 - (x2 / 12.0) * (1.0 - (x2 / 30.0) * (1.0 - x2 / 56.0)))
    return np.where(small, series, (1.0 - np.cos(xs)) / (xs * xs))


def _x_minus_sin_over_x3(x):
    # (x - sin x)/x^3 with a series branch at small x.
    small = x < SMALL_ANGLE
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = (1.0 - (x2 / 20.0) * (1.0 - (x2 / 42.0) * (1.0 - x2 / 72.0))) / 6.0
    return np.where(small, series, (xs - np.sin(xs)) / (xs * xs * xs))


def exp_so3(theta):
    """Rodrigues formula: exponential map from so(3) vectors to SO(3)."""
    theta = np.asarray(theta, dtype=float)
    angle = np.linalg.norm(theta, axis=-1)
    th = hat(theta)
    th2 = th @ th
    c1 = _sin_x_over_x(angle)[..., None, None]
    c2 = _one_minus_cos_over_x2(angle)[..., None, None]
    return np.eye(3) + c1 * th + c2 * th2


def so3_left_jacobian(theta):
    """Translation factor of the se(3) exponential (a.k.a. f(theta)).

    Equals I + (1 - cos a)/a^2 * hat(theta) + (a - sin a)/a^3 * hat(theta)^2
    with a = |theta|; tends to the identity as theta -> 0.
    """
    theta = np.asarray(theta, dtype=float)
    angle = np.linalg.norm(theta, axis=-1)
    th = hat(theta)
    th2 = th @ th
    c2 = _one_minus_cos_over_x2(angle)[..., None, None]
    c3 = _x_minus_sin_over_x3(angle)[..., None, None]
    return np.eye(3) + c2 * th + c3 * th2


def exp_se3(sigma):
    """Exponential map from se(3) coordinates (theta, zeta) to SE(3)."""
    sigma = np.asarray(sigma, dtype=float)
    theta, zeta = sigma[..., :3], sigma[..., 3:]
    s = exp_so3(theta)
    rho = (so3_left_jacobian(theta) @ zeta[..., None])[..., 0]
    return SE3(s, rho)


def compose_se3(a: SE3, b: SE3) -> SE3:
    """Group product of SE(3) elements (matches the 4x4 embedded product)."""
    return SE3(a.s @ b.s, (a.s @ b.rho[..., None])[..., 0] + a.rho)


def dexpinv(sigma, xi, order=1):
    """Truncated inverse right-trivialized tangent of exp.

    Returns sum_{k=0}^{order} (B_k/k!) ad_sigma^k (xi), the Bernoulli-number
    series that pulls a group tangent back to the algebra.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if order >= len(BERNOULLI):
        raise ValueError(f"order {order} exceeds tabulated Bernoulli numbers")
    out = np.asarray(xi, dtype=float).copy()
    term = np.asarray(xi, dtype=float)
    kfact = 1.0
    for k in range(1, order + 1):
        term = bracket(sigma, term)
        kfact *= k
        if BERNOULLI[k] != 0.0:
            out = out + (BERNOULLI[k] / kfact) * term
    return out


def dexp(sigma, eta, order):
    """Truncated right-trivialized tangent of exp (test oracle).

    Returns sum_{k=0}^{order} ad_sigma^k (eta) / (k+1)!.  Not used on the
    stepping path; it exists to verify :func:`dexpinv` by composition.
    """
    out = np.asarray(eta, dtype=float).copy()
    term = np.asarray(eta, dtype=float)
    fact = 1.0
    for k in range(1, order + 1):
        term = bracket(sigma, term)
        fact *= k + 1
        out = out + term / fact
    return out


def embed_se3_algebra(sigma):
    """se(3) coordinates to the 4x4 matrix with zero last row."""
    sigma = np.asarray(sigma, dtype=float)
    m = np.zeros(sigma.shape[:-1] + (4, 4))
    m[..., :3, :3] = hat(sigma[..., :3])
    m[..., :3, 3] = sigma[..., 3:]
    return m


def embed_se3_group(g: SE3):
    """SE(3) element to the 4x4 homogeneous matrix."""
    s = np.asarray(g.s, dtype=float)
    m = np.zeros(s.shape[:-2] + (4, 4))
    m[..., :3, :3] = s
    m[..., :3, 3] = g.rho
    m[..., 3, 3] = 1.0
    return m
