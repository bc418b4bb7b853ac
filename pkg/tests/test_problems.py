import numpy as np
import pytest

from liesde import algebra, integrators, problems
from liesde.problems import (
    AUV_BETA,
    RIGID_BODY_ALPHA,
    RigidBody,
    UnderwaterVehicle,
    make_problem,
    scaled_cross,
)

from conftest import fd_directional


def _xi_matrix_display(alpha_row, y):
    # the channel matrix written out entry by entry
    a1, a2, a3 = alpha_row
    y1, y2, y3 = y
    return np.array(
        [
            [0.0, -y3 / a3, y2 / a2],
            [y3 / a3, 0.0, -y1 / a1],
            [-y2 / a2, y1 / a1, 0.0],
        ]
    )


def _a_display(y, z, alpha, beta):
    # componentwise definition of the scaled pairing
    return np.array(
        [
            (y[1] * z[2] / alpha[1] - y[2] * z[1] / alpha[2]) / beta[0],
            (y[2] * z[0] / alpha[2] - y[0] * z[2] / alpha[0]) / beta[1],
            (y[0] * z[1] / alpha[0] - y[1] * z[0] / alpha[1]) / beta[2],
        ]
    )


def test_alpha_table_values():
    assert np.array_equal(RIGID_BODY_ALPHA[0], [3.0, 1.0, 2.0])
    assert np.array_equal(RIGID_BODY_ALPHA[1], [1.0, 0.5, 1.5])
    assert np.array_equal(RIGID_BODY_ALPHA[2], [0.25, 1.0, 0.5])


def test_rb_xi_examples(rng):
    P = RigidBody()
    assert np.array_equal(P.xi(1, np.array([1.0, 0.0, 0.0])), [1.0, 0.0, 0.0])
    assert np.array_equal(P.xi(0, np.zeros(3)), np.zeros(3))
    for _ in range(20):
        y = rng.normal(size=3)
        for i in range(3):
            assert np.allclose(
                algebra.hat(P.xi(i, y)), _xi_matrix_display(P.alpha[i], y), atol=1e-15
            )


def test_rb_field_examples(rng):
    P = RigidBody()
    assert np.allclose(P.V(0, np.array([1.0, 0.0, 0.0])), 0.0, atol=0)
    # evaluate xi_1(y) y by an independent matrix-vector product
    y = np.array([0.0, 1.0, 1.0])
    want = _xi_matrix_display(P.alpha[1], y) @ y
    got = P.V(1, y)
    assert np.allclose(got, want, atol=1e-15)
    assert np.allclose(got, [4.0 / 3.0, 0.0, 0.0], atol=1e-15)
    # tangency
    y = rng.normal(size=(10_000, 3))
    for i in range(3):
        assert np.max(np.abs(np.sum(P.V(i, y) * y, axis=-1))) < 1e-12


def test_rb_vv_finite_difference(rng):
    P = RigidBody()
    assert np.allclose(P.VV(1, 2, np.array([1.0, 0.0, 0.0])), 0.0, atol=0)
    for _ in range(100):
        y = rng.normal(size=3)
        for i in range(3):
            for j in range(3):
                got = P.VV(i, j, y)
                want = fd_directional(lambda u: P.V(j, u), y, P.V(i, y), 1e-5)
                assert np.max(np.abs(got - want)) < 1e-7 * max(1.0, np.max(np.abs(got)))


def test_rb_bracket_symbolic_at_hand_point():
    # pushforward bracket [V1, V2] expanded symbolically at y = (0, 1, 1)
    sympy = pytest.importorskip("sympy")
    y1, y2, y3 = sympy.symbols("y1 y2 y3")
    yv = sympy.Matrix([y1, y2, y3])
    P = RigidBody()

    def field(i):
        a = P.alpha[i]
        xi = sympy.Matrix([y1 / a[0], y2 / a[1], y3 / a[2]])
        return xi.cross(yv)

    v1, v2 = field(1), field(2)
    jac = lambda v: v.jacobian(yv)  # noqa: E731
    bracket = jac(v2) * v1 - jac(v1) * v2
    at = {y1: 0, y2: 1, y3: 1}
    want = np.array([float(c.subs(at)) for c in bracket])
    y = np.array([0.0, 1.0, 1.0])
    got = P.VV(1, 2, y) - P.VV(2, 1, y)
    assert np.allclose(got, want, atol=1e-12)


def test_rb_vvv_finite_difference(rng):
    P = RigidBody()
    for _ in range(30):
        y = rng.normal(size=3)
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    got = P.VVV(i, j, k, y)
                    want = fd_directional(lambda u: P.VV(j, k, u), y, P.V(i, y), 1e-5)
                    assert np.max(np.abs(got - want)) < 1e-6 * max(1.0, np.max(np.abs(got)))


def test_scaled_cross_examples():
    ones = np.ones(3)
    y = np.array([1.0, 2.0, -0.5])
    assert np.allclose(scaled_cross(y, y, ones, ones), 0.0, atol=0)
    got = scaled_cross(
        np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), ones, np.array([1.0, 2.0, 3.0])
    )
    assert np.allclose(got, [0.0, 0.0, 1.0 / 3.0], atol=0)
    with pytest.raises(ValueError):
        scaled_cross(y, y, np.array([1.0, 0.0, 1.0]), ones)


def test_scaled_cross_antisymmetric_pattern(rng):
    # each component is a 2x2 determinant in (y, z)
    alpha = np.array([3.0, 1.0, 2.0])
    beta = np.array([1.0, 0.5, 1.5])
    y, z = rng.normal(size=(2, 3))
    got = scaled_cross(y, z, alpha, beta)
    swapped = scaled_cross(z, y, alpha, beta)
    # swapping y and z negates only the diagonal-scaled part pattern-wise;
    # check against the explicit display instead
    assert np.allclose(got, _a_display(y, z, alpha, beta), atol=1e-14)
    assert np.allclose(swapped, _a_display(z, y, alpha, beta), atol=1e-14)


def test_rb_vv_o_matches_display_and_pullback_oracle(rng):
    P = RigidBody()
    for _ in range(50):
        y = rng.normal(size=3)
        for i in range(3):
            for j in range(3):
                got = P.vv_o(i, j, y)
                display = scaled_cross(y, y, P.alpha[i], P.alpha[j]) - 0.5 * np.cross(
                    P.xi(i, y), P.xi(j, y)
                )
                assert np.allclose(got, display, atol=1e-13)
                eta = P.xi(i, y)
                oracle = fd_directional(
                    lambda s: integrators.pullback_field(P, y, j, s, order=2),
                    np.zeros(3), eta, 1e-5,
                )
                assert np.max(np.abs(got - oracle)) < 1e-6
        # repeated channel: bracket term vanishes
        assert np.allclose(
            P.vv_o(1, 1, y), scaled_cross(y, y, P.alpha[1], P.alpha[1]), atol=1e-14
        )


def test_rb_noncommuting_at_start():
    P = RigidBody()
    y0 = P.y0
    assert np.linalg.norm(P.VV(1, 2, y0) - P.VV(2, 1, y0)) > 0.1


def test_rb_normalize_flag():
    P = RigidBody(normalize=True)
    assert np.linalg.norm(P.y0) == pytest.approx(1.0, abs=1e-15)
    assert P.radius == pytest.approx(1.0, abs=1e-15)
    assert RigidBody().radius == pytest.approx(2.0, abs=1e-12)


def test_rb_defects():
    P = RigidBody()
    assert np.allclose(P.defects(P.y0), 0.0, atol=0)
    assert np.allclose(P.defects(1.1 * P.y0), 0.1 * np.linalg.norm(P.y0), atol=1e-12)


def test_auv_start_point_casimirs():
    P = UnderwaterVehicle()
    # dot products of the printed initial data
    assert P.c0[0] == pytest.approx(2.0, abs=1e-12)
    assert P.c0[1] == pytest.approx(4.0, abs=1e-12)
    assert np.allclose(P.defects(P.y0), 0.0, atol=0)


def test_auv_field_zero_for_isotropic_aligned_state():
    P = UnderwaterVehicle(alpha=np.ones((3, 3)), beta=np.ones((3, 3)))
    y = np.array([1.0, 2.0, 3.0, 0.0, 0.0, 0.0])
    assert np.allclose(P.V(0, y), 0.0, atol=0)


def test_auv_casimir_tangency(rng):
    P = UnderwaterVehicle()
    y = rng.normal(size=(10_000, 6))
    pi, p = y[:, :3], y[:, 3:]
    for i in range(3):
        v = P.V(i, y)
        grad_c1 = np.sum(p * v[:, :3], axis=-1) + np.sum(pi * v[:, 3:], axis=-1)
        grad_c2 = 2.0 * np.sum(p * v[:, 3:], axis=-1)
        assert np.max(np.abs(grad_c1)) < 1e-12
        assert np.max(np.abs(grad_c2)) < 1e-12


def test_auv_vv_vvv_finite_difference(rng):
    P = UnderwaterVehicle()
    for _ in range(30):
        y = rng.normal(size=6)
        for i in range(3):
            for j in range(3):
                got = P.VV(i, j, y)
                want = fd_directional(lambda u: P.V(j, u), y, P.V(i, y), 1e-5)
                assert np.max(np.abs(got - want)) < 1e-6 * max(1.0, np.max(np.abs(got)))
                got3 = P.VVV(i, j, 0, y)
                want3 = fd_directional(lambda u: P.VV(j, 0, u), y, P.V(i, y), 1e-5)
                assert np.max(np.abs(got3 - want3)) < 1e-6 * max(1.0, np.max(np.abs(got3)))


def test_auv_vv_o_matches_display_and_pullback_oracle(rng):
    P = UnderwaterVehicle()
    for _ in range(30):
        y = rng.normal(size=6)
        pi, p = y[:3], y[3:]
        for i in range(3):
            for j in range(3):
                got = P.vv_o(i, j, y)
                # block display: rotational part pairs (pi, pi) and (p, p),
                # translational part pairs (pi, p); minus half the bracket
                rot = _a_display(pi, pi, P.alpha[i], P.alpha[j]) + _a_display(
                    p, p, P.beta[i], P.alpha[j]
                )
                tra = _a_display(pi, p, P.alpha[i], P.beta[j])
                xi_i = np.concatenate([pi / P.alpha[i], p / P.beta[i]])
                xi_j = np.concatenate([pi / P.alpha[j], p / P.beta[j]])
                display = np.concatenate([rot, tra]) - 0.5 * algebra.bracket(xi_i, xi_j)
                assert np.allclose(got, display, atol=1e-12)
                if i == j:
                    no_bracket = np.concatenate([rot, tra])
                    assert np.allclose(got, no_bracket, atol=1e-12)
                oracle = fd_directional(
                    lambda s: integrators.pullback_field(P, y, j, s, order=2),
                    np.zeros(6), P.xi(i, y), 1e-5,
                )
                assert np.max(np.abs(got - oracle)) < 1e-6


def test_auv_action_axioms(rng):
    P = UnderwaterVehicle()
    y = rng.normal(size=6)
    identity = algebra.SE3(np.eye(3), np.zeros(3))
    assert np.allclose(P.act(y, identity), y, atol=0)
    # pure translation: (pi + rho x p, p); both Casimirs untouched
    rho = rng.normal(size=3)
    g = algebra.SE3(np.eye(3), rho)
    moved = P.act(y, g)
    assert np.allclose(moved[:3], y[:3] + np.cross(rho, y[3:]), atol=1e-14)
    assert np.allclose(moved[3:], y[3:], atol=0)
    assert np.allclose(P.casimirs(moved), P.casimirs(y), atol=1e-13)
    # composition axiom on random pairs
    for _ in range(20):
        a = algebra.exp_se3(rng.normal(size=6))
        b = algebra.exp_se3(rng.normal(size=6))
        lhs = P.act(P.act(y, b), a)
        rhs = P.act(y, algebra.compose_se3(a, b))
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_auv_action_preserves_casimirs(rng):
    P = UnderwaterVehicle()
    y = rng.normal(size=(200, 6))
    for _ in range(20):
        g = algebra.exp_se3(rng.normal(size=6) * 2.0)
        moved = P.act(y, g)
        assert np.max(np.abs(P.casimirs(moved) - P.casimirs(y))) < 1e-12


def test_rb_action_preserves_norm(rng):
    P = RigidBody()
    y = rng.normal(size=(200, 3))
    g = algebra.exp_so3(rng.normal(size=3) * 3.0)
    assert np.max(
        np.abs(np.linalg.norm(P.act(y, g), axis=-1) - np.linalg.norm(y, axis=-1))
    ) < 1e-12


def test_auv_noncommuting_at_start():
    P = UnderwaterVehicle()
    assert np.linalg.norm(P.VV(1, 2, P.y0) - P.VV(2, 1, P.y0)) > 0.1


def test_auv_mk_step_consistent_with_taylor_step(rng):
    # the group step and the direct Taylor step approximate the same flow,
    # so their gap shrinks at order h^(3/2) (checked as a slope)
    from liesde.noise import StepNoise

    P = UnderwaterVehicle()
    hs = [2.0**-k for k in range(4, 9)]
    gaps = []
    for h in hs:
        dw = np.random.default_rng(5).normal(0, np.sqrt(h), size=2)
        n = StepNoise(h, dw, np.zeros((2, 2)), np.zeros(2))
        y_mk = integrators.step_mk_1(P, P.y0, n)
        y_st = integrators.step_st_1(P, P.y0, n)
        gaps.append(np.linalg.norm(y_mk - y_st))
    slope = np.polyfit(np.log2(hs), np.log2(gaps), 1)[0]
    assert slope > 1.4


def test_auv_defects_after_group_step(rng):
    P = UnderwaterVehicle()
    from liesde.noise import path_rng, sample_step

    n = sample_step(path_rng(3, 1), 0.05, 2)
    y1 = integrators.step_mk_1(P, P.y0, n)
    assert np.max(P.defects(y1)) < 1e-10


def test_make_problem():
    assert make_problem("rigidbody").d == 2
    assert make_problem("rigidbody1").d == 1
    assert make_problem("auv").name == "auv"
    with pytest.raises(ValueError):
        make_problem("nope")
    with pytest.raises(ValueError):
        make_problem("auv", normalize=True)


def test_constants_serializable():
    import json

    for name in ("rigidbody", "rigidbody1", "auv"):
        payload = json.dumps(make_problem(name).constants())
        assert "alpha" in payload


def test_beta_table_default():
    P = UnderwaterVehicle()
    assert np.array_equal(P.beta, AUV_BETA)
    assert np.all(P.beta > 0)
