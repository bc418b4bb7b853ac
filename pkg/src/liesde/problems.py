"""The concrete systems: a rigid body on a sphere and an underwater
vehicle on the dual of se(3), plus a one-channel rigid-body variant.

Both systems share the same structure: the state-dependent algebra element
xi(i, y) is linear in y, and the governing field is the infinitesimal
action of that element frozen at the current state,

    V_i(y) = inf_act(xi(i, y), y),

which makes V_i quadratic in y.  The base class derives the operator
compositions V_i V_j and V_i V_j V_k, and the second-order algebra hook
vv_o, from those two ingredients alone.  Operator composition follows the
convention that the first factor differentiates: V_i V_j at y is the
directional derivative of V_j along V_i(y).
"""
from __future__ import annotations

import numpy as np

from . import algebra

# Rigid body inertia-like constants; row i holds the three divisors of
# channel i.  Chosen so the three fields pairwise fail to commute.
RIGID_BODY_ALPHA = np.array(
    [
        [3.0, 1.0, 2.0],
        [1.0, 0.5, 1.5],
        [0.25, 1.0, 0.5],
    ]
)

# Vehicle mass-matrix diagonals (the inertia diagonals reuse the table
# above).  Positive, anisotropic, and bracket-generating at the initial
# state; echoed into every result file so runs are reproducible.
AUV_BETA = np.array(
    [
        [2.0, 2.0 / 3.0, 3.0],
        [1.5, 3.0, 0.5],
        [1.0 / 3.0, 2.0, 4.0],
    ]
)

RIGID_BODY_Y0 = np.array([np.sqrt(2.0), np.sqrt(2.0), 0.0])
AUV_Y0 = np.array([np.sqrt(2.0), np.sqrt(2.0), 0.0, 0.0, np.sqrt(2.0), np.sqrt(2.0)])


def _cross(a, b):
    # Hand-rolled cross product; noticeably faster than np.cross on the
    # small batches the steppers run on.
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def scaled_cross(y, z, alpha, beta):
    """Componentwise (y/alpha) x z, divided componentwise by beta."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha == 0.0) or np.any(beta == 0.0):
        raise ValueError("scaled_cross requires nonzero divisors")
    return _cross(np.asarray(y, dtype=float) / alpha, np.asarray(z, dtype=float)) / beta


class Problem:
    """Capability contract consumed by the steppers.

    Subclasses supply: ``dim``, ``d``, ``y0``, ``xi`` (linear in the
    state), ``inf_act`` (infinitesimal action, bilinear), ``act``,
    ``exp_alg`` and ``defects``.
    """

    name = "problem"
    dim = 0
    d = 0
    defect_names: tuple = ()

    def xi(self, i, y):
        raise NotImplementedError

    def inf_act(self, eta, y):
        raise NotImplementedError

    def act(self, y, g):
        raise NotImplementedError

    def exp_alg(self, sigma):
        raise NotImplementedError

    def defects(self, y):
        raise NotImplementedError

    def constants(self) -> dict:
        return {}

    # Derived operators -------------------------------------------------

    def V(self, i, y):
        """Governing field: infinitesimal action of xi(i, y) at y."""
        return self.inf_act(self.xi(i, y), y)

    def VV(self, i, j, y):
        """Directional derivative of V_j along V_i (both slots of the
        quadratic field contribute)."""
        vi = self.V(i, y)
        return self.inf_act(self.xi(j, vi), y) + self.inf_act(self.xi(j, y), vi)

    def VVV(self, i, j, k, y):
        """Directional derivative of (V_j V_k) along V_i."""
        vi = self.V(i, y)
        vj = self.V(j, y)
        vvij = self.VV(i, j, y)
        return (
            self.inf_act(self.xi(k, vvij), y)
            + self.inf_act(self.xi(k, vj), vi)
            + self.inf_act(self.xi(k, vi), vj)
            + self.inf_act(self.xi(k, y), vvij)
        )

    def vv_o(self, i, j, y):
        """Second-order composition of the pulled-back algebra fields,
        anchored at the zero element with base point y."""
        return self.xi(j, self.V(i, y)) - 0.5 * algebra.bracket(self.xi(i, y), self.xi(j, y))


class RigidBody(Problem):
    """Free rigid body with multiplicative noise, evolving on a sphere.

    The group is SO(3) acting by left multiplication; exp keeps every step
    on the sphere of the initial radius.  ``d`` may be 2 (two independent
    channels) or 1 (channels {0, 1} only, for the one-noise schemes).
    """

    dim = 3
    defect_names = ("sphere",)

    def __init__(self, d=2, normalize=False, alpha=None, y0=None):
        if d not in (1, 2):
            raise ValueError("rigid body supports d in {1, 2}")
        self.d = d
        self.name = "rigidbody" if d == 2 else "rigidbody1"
        self.alpha = RIGID_BODY_ALPHA.copy() if alpha is None else np.asarray(alpha, float)
        if np.any(self.alpha == 0.0):
            raise ValueError("alpha entries must be nonzero")
        self._inv_alpha = 1.0 / self.alpha
        self.normalize = bool(normalize)
        y0 = RIGID_BODY_Y0.copy() if y0 is None else np.asarray(y0, float)
        self.y0 = y0 / np.linalg.norm(y0) if normalize else y0
        self.radius = float(np.linalg.norm(self.y0))

    def xi(self, i, y):
        return np.asarray(y, dtype=float) * self._inv_alpha[i]

    def inf_act(self, eta, y):
        return _cross(eta, np.asarray(y, dtype=float))

    def act(self, y, g):
        return (g @ y[..., None])[..., 0]

    def exp_alg(self, sigma):
        return algebra.exp_so3(sigma)

    def defects(self, y):
        r = np.linalg.norm(np.asarray(y, dtype=float), axis=-1)
        return np.abs(r - self.radius)[..., None]

    def constants(self):
        return {
            "alpha": self.alpha.tolist(),
            "y0": self.y0.tolist(),
            "normalize": self.normalize,
        }


class UnderwaterVehicle(Problem):
    """Ellipsoidal vehicle on the dual of se(3): state (pi, p) of angular
    and linear momentum, transported by the coadjoint action.

    The governing fields point along minus the infinitesimal coadjoint
    action, so the algebra hooks carry a minus sign; the action itself is
    a rotation plus a cross-product shear and preserves both Casimirs
    pi . p and |p|^2 exactly.
    """

    dim = 6
    d = 2
    name = "auv"
    defect_names = ("casimir1", "casimir2")

    def __init__(self, alpha=None, beta=None, y0=None):
        self.alpha = RIGID_BODY_ALPHA.copy() if alpha is None else np.asarray(alpha, float)
        self.beta = AUV_BETA.copy() if beta is None else np.asarray(beta, float)
        if np.any(self.alpha == 0.0) or np.any(self.beta == 0.0):
            raise ValueError("inertia and mass diagonals must be nonzero")
        self._inv = np.concatenate([1.0 / self.alpha, 1.0 / self.beta], axis=1)
        self.y0 = AUV_Y0.copy() if y0 is None else np.asarray(y0, float)
        self.c0 = self.casimirs(self.y0)

    @staticmethod
    def casimirs(y):
        pi, p = np.asarray(y, float)[..., :3], np.asarray(y, float)[..., 3:]
        c1 = np.sum(pi * p, axis=-1)
        c2 = np.sum(p * p, axis=-1)
        return np.stack([c1, c2], axis=-1)

    def xi(self, i, y):
        return np.asarray(y, dtype=float) * -self._inv[i]

    def inf_act(self, eta, y):
        # Infinitesimal coadjoint action: minus ad-star of eta at y.
        y = np.asarray(y, dtype=float)
        a, b = eta[..., :3], eta[..., 3:]
        pi, p = y[..., :3], y[..., 3:]
        out = np.empty(np.broadcast_shapes(eta.shape, y.shape))
        out[..., :3] = _cross(a, pi) + _cross(b, p)
        out[..., 3:] = _cross(a, p)
        return out

    def act(self, y, g: algebra.SE3):
        pi, p = np.asarray(y, float)[..., :3], np.asarray(y, float)[..., 3:]
        spi = (g.s @ pi[..., None])[..., 0]
        sp = (g.s @ p[..., None])[..., 0]
        return np.concatenate([spi + _cross(g.rho, sp), sp], axis=-1)

    def exp_alg(self, sigma):
        return algebra.exp_se3(sigma)

    def defects(self, y):
        return np.abs(self.casimirs(y) - self.c0)

    def constants(self):
        return {
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "y0": self.y0.tolist(),
        }


PROBLEM_NAMES = ("rigidbody", "rigidbody1", "auv")


def make_problem(name: str, normalize: bool = False) -> Problem:
    """Instantiate a problem by its CLI identifier."""
    if name == "rigidbody":
        return RigidBody(d=2, normalize=normalize)
    if name == "rigidbody1":
        return RigidBody(d=1, normalize=normalize)
    if name == "auv":
        if normalize:
            raise ValueError("normalize applies to the rigid body only")
        return UnderwaterVehicle()
    raise ValueError(f"unknown problem {name!r}; expected one of {PROBLEM_NAMES}")
