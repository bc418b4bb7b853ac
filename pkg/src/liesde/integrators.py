"""One-step maps for every scheme.

Taylor steppers update the state directly from the fields and their
compositions; group steppers assemble an algebra element, exponentiate,
and act, so the update stays on the manifold by construction; the
Lie-series steppers freeze a truncated series as an ordinary vector field
and exponentiate it with an inner classical Runge-Kutta solve over unit
time (a deliberately non-geometric inner solver).

All steppers are pure functions of (problem, state, step noise, options)
and reduce to their deterministic counterparts when the noise is zero.
Two-channel schemes accept d = 1 problems by dropping the channel-2 terms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import dexpinv
from .noise import StepNoise


@dataclass(frozen=True)
class StepOptions:
    """Per-method knobs.

    ``ode_substeps`` of ``None`` picks the default for the method's order
    (1 for order <= 1, 2 for order 3/2).  ``dexpinv_order`` only affects
    the generic pullback field used by oracles and experiments; the
    production group steppers embed the first-order correction in their
    analytic hooks.
    """

    include_diagonal_half: bool = False
    dexpinv_order: int = 1
    ode_substeps: int | None = None


DEFAULT_OPTIONS = StepOptions()


def _substeps(opts: StepOptions, order: float) -> int:
    if opts.ode_substeps is not None:
        if opts.ode_substeps < 1:
            raise ValueError("ode_substeps must be >= 1")
        return opts.ode_substeps
    return 2 if order >= 1.5 else 1


def _rk4_unit_flow(field, y, substeps: int):
    # Classical 4th-order one-step method for u' = field(u), u(0) = y,
    # integrated over unit time in `substeps` equal pieces.
    tau = 1.0 / substeps
    u = y
    for _ in range(substeps):
        k1 = field(u)
        k2 = field(u + 0.5 * tau * k1)
        k3 = field(u + 0.5 * tau * k2)
        k4 = field(u + tau * k3)
        u = u + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u


def _strat_pair(n: StepNoise):
    # J_12 and J_21 reconstructed from the increments and the area.
    prod = n.dW[..., 0] * n.dW[..., 1]
    l12 = n.L[..., 0, 1]
    return 0.5 * (prod + l12), 0.5 * (prod - l12)


def step_st_half(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-1/2 stochastic Taylor step (increments only).

    With ``include_diagonal_half`` and two channels, the repeated-channel
    terms J_11 V_1 V_1 and J_22 V_2 V_2 are added; that variant is the
    Taylor side of the order-1/2 uniform-accuracy comparison.
    """
    out = y + n.h * P.V(0, y)
    for i in range(1, P.d + 1):
        out = out + n.dW[..., i - 1, None] * P.V(i, y)
    if opts.include_diagonal_half and P.d == 2:
        for i in (1, 2):
            jii = 0.5 * n.dW[..., i - 1] ** 2
            out = out + jii[..., None] * P.VV(i, i, y)
    return out


def step_st_1(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-1 stochastic Taylor step, areas included."""
    dw1 = n.dW[..., 0]
    out = y + n.h * P.V(0, y) + dw1[..., None] * P.V(1, y)
    out = out + (0.5 * dw1**2)[..., None] * P.VV(1, 1, y)
    if P.d == 2:
        dw2 = n.dW[..., 1]
        j12, j21 = _strat_pair(n)
        out = out + dw2[..., None] * P.V(2, y)
        out = out + j12[..., None] * P.VV(1, 2, y)
        out = out + j21[..., None] * P.VV(2, 1, y)
        out = out + (0.5 * dw2**2)[..., None] * P.VV(2, 2, y)
    return out


def _v1_fourth(P, y):
    # Fourth composition of the noise field, as a directional finite
    # difference of VVV(1,1,1, .) along V_1.  Only its h^2-weighted mean
    # enters the order-3/2 step, so cube-root-of-eps accuracy suffices.
    v1 = P.V(1, y)
    scale = np.maximum(np.linalg.norm(y, axis=-1, keepdims=True), 1.0)
    vnorm = np.maximum(np.linalg.norm(v1, axis=-1, keepdims=True), 1.0)
    eps = np.finfo(float).eps ** (1.0 / 3.0) * scale / vnorm
    return (P.VVV(1, 1, 1, y + eps * v1) - P.VVV(1, 1, 1, y - eps * v1)) / (2.0 * eps)


def step_st_32(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-3/2 stochastic Taylor step for one channel.

    The time-area integrals supply J_10 = I_1 and J_01 = h dW_1 - I_1.
    Every omitted order-h^2 integral is replaced by its expectation: the
    deterministic drift-drift term enters as (h^2/2) V_0 V_0 and the
    triple/quadruple noise terms as their conditional means, which is what
    keeps the global order at 3/2.
    """
    if P.d != 1:
        raise ValueError("order-3/2 Taylor step requires d = 1")
    h = n.h
    dw = n.dW[..., 0]
    j10 = n.I[..., 0]
    j01 = h * dw - j10
    out = y + h * P.V(0, y) + dw[..., None] * P.V(1, y)
    out = out + (0.5 * dw**2)[..., None] * P.VV(1, 1, y)
    out = out + j01[..., None] * P.VV(0, 1, y)
    out = out + j10[..., None] * P.VV(1, 0, y)
    out = out + (0.5 * h**2) * P.VV(0, 0, y)
    out = out + (dw**3 / 6.0)[..., None] * P.VVV(1, 1, 1, y)
    out = out + (h**2 / 4.0) * (P.VVV(0, 1, 1, y) + P.VVV(1, 1, 0, y))
    out = out + (h**2 / 8.0) * _v1_fourth(P, y)
    return out


def step_mk_half(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-1/2 group step: exponentiate the increment-weighted hooks."""
    sigma = n.h * P.xi(0, y)
    for i in range(1, P.d + 1):
        sigma = sigma + n.dW[..., i - 1, None] * P.xi(i, y)
    return P.act(y, P.exp_alg(sigma))


def step_mk_1(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-1 group step: Taylor update on the algebra, then exp and act.

    The second-order hooks vv_o already carry the -1/2 bracket correction
    of the pulled-back fields, so the assembled element needs no further
    dexpinv treatment.  The result satisfies the manifold constraints to
    round-off by construction.
    """
    dw1 = n.dW[..., 0]
    sigma = n.h * P.xi(0, y) + dw1[..., None] * P.xi(1, y)
    sigma = sigma + (0.5 * dw1**2)[..., None] * P.vv_o(1, 1, y)
    if P.d == 2:
        dw2 = n.dW[..., 1]
        j12, j21 = _strat_pair(n)
        sigma = sigma + dw2[..., None] * P.xi(2, y)
        sigma = sigma + j12[..., None] * P.vv_o(1, 2, y)
        sigma = sigma + j21[..., None] * P.vv_o(2, 1, y)
        sigma = sigma + (0.5 * dw2**2)[..., None] * P.vv_o(2, 2, y)
    return P.act(y, P.exp_alg(sigma))


def _frozen_series(P, n: StepNoise, area: bool, mean_bracket: bool, time_area: bool):
    # The truncated exponential Lie series for this step, frozen as an
    # ordinary vector field u -> psi(u).  `area` switches the two-channel
    # Levy-area bracket on; `mean_bracket` adds the h^2/12 double-bracket
    # expectation term and `time_area` the (J_01 - J_10)/2 bracket, both
    # one-channel refinements.
    h = n.h
    dw1 = n.dW[..., 0, None]
    if P.d == 2:
        dw2 = n.dW[..., 1, None]
        half_l12 = 0.5 * n.L[..., 0, 1, None]

        def psi(u):
            out = h * P.V(0, u) + dw1 * P.V(1, u) + dw2 * P.V(2, u)
            if area:
                out = out + half_l12 * (P.VV(1, 2, u) - P.VV(2, 1, u))
            return out

        return psi

    j10 = n.I[..., 0, None]
    j01 = h * dw1 - j10

    def psi(u):
        out = h * P.V(0, u) + dw1 * P.V(1, u)
        if mean_bracket:
            # [V1, [V1, V0]] expanded in operator compositions.
            dbl = P.VVV(1, 1, 0, u) - 2.0 * P.VVV(1, 0, 1, u) + P.VVV(0, 1, 1, u)
            out = out + (h**2 / 12.0) * dbl
        if time_area:
            out = out + 0.5 * (j01 - j10) * (P.VV(0, 1, u) - P.VV(1, 0, u))
        return out

    return psi


def step_ls_half(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-1/2 exponential Lie series step (increments only, no area)."""
    psi = _frozen_series(P, n, area=False, mean_bracket=False, time_area=False)
    return _rk4_unit_flow(psi, y, _substeps(opts, 0.5))


def step_cg_1(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-1 Castell-Gaines step: exponentiate the area-corrected series
    with a non-geometric inner Runge-Kutta solve."""
    psi = _frozen_series(P, n, area=True, mean_bracket=False, time_area=False)
    return _rk4_unit_flow(psi, y, _substeps(opts, 1.0))


def step_uls_1(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-1 uniformly accurate Lie series step (one channel)."""
    if P.d != 1:
        raise ValueError("uniform Lie series steps require d = 1")
    psi = _frozen_series(P, n, area=False, mean_bracket=True, time_area=False)
    return _rk4_unit_flow(psi, y, _substeps(opts, 1.0))


def step_uls_32(P, y, n: StepNoise, opts: StepOptions = DEFAULT_OPTIONS):
    """Order-3/2 uniformly accurate Lie series step (one channel)."""
    if P.d != 1:
        raise ValueError("uniform Lie series steps require d = 1")
    psi = _frozen_series(P, n, area=False, mean_bracket=True, time_area=True)
    return _rk4_unit_flow(psi, y, _substeps(opts, 1.5))


def pullback_field(P, y, i, sigma, order=1):
    """Generic pulled-back algebra field at sigma for base point y.

    Evaluates dexpinv of the hook at the transported state; used as the
    independent oracle for the analytic vv_o hooks and for dexpinv-order
    experiments.
    """
    moved = P.act(y, P.exp_alg(sigma))
    return dexpinv(sigma, P.xi(i, moved), order)


#: method id -> (stepper, strong order, channel counts it accepts)
METHODS = {
    "st12": (step_st_half, 0.5, (1, 2)),
    "st1": (step_st_1, 1.0, (1, 2)),
    "st32": (step_st_32, 1.5, (1,)),
    "mk12": (step_mk_half, 0.5, (1, 2)),
    "mk1": (step_mk_1, 1.0, (1, 2)),
    "ls12": (step_ls_half, 0.5, (1, 2)),
    "cg1": (step_cg_1, 1.0, (1, 2)),
    "uls1": (step_uls_1, 1.0, (1,)),
    "uls32": (step_uls_32, 1.5, (1,)),
}


def get_method(method_id: str):
    """Look up a stepper by id; raises for unknown ids."""
    try:
        return METHODS[method_id]
    except KeyError:
        raise ValueError(
            f"unknown method {method_id!r}; expected one of {sorted(METHODS)}"
        ) from None


def check_method(method_id: str, d: int) -> None:
    _, _, channels = get_method(method_id)
    if d not in channels:
        raise ValueError(f"method {method_id!r} does not support d = {d}")


def propagate(P, method_id: str, seq, opts: StepOptions = DEFAULT_OPTIONS, y0=None,
              observer=None):
    """Run a stepper over a noise sequence; returns the terminal state.

    ``observer(step_index, t, y)`` is called after every step when given.
    The state broadcasts over the sequence's batch axes.
    """
    stepper, _, _ = get_method(method_id)
    check_method(method_id, P.d)
    y = np.asarray(P.y0 if y0 is None else y0, dtype=float)
    batch = seq.dW.shape[1:-1]
    y = np.broadcast_to(y, batch + y.shape[-1:]).copy()
    t = 0.0
    for k in range(len(seq)):
        y = stepper(P, y, seq.step(k), opts)
        t += seq.h
        if observer is not None:
            observer(k, t, y)
    return y
