import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ebconv import problems
from ebconv.core import (
    AffineSet,
    CompositeG,
    FiniteSet,
    Gradient,
    LeastNormSubgradient,
    MalformedModelError,
    MoreauGradient,
    NumericOracle,
    ObjectiveModel,
    OutsideDomain,
    ProxGradientResidual,
    Region,
    SeparablePart,
    SinglePoint,
    as_point,
    distance_to_critical,
    evaluate,
    moreau_envelope,
    objective_prox,
    project_to_critical,
    prox_linearized,
    reference_minimizer,
    residual,
    soft_threshold,
)
from ebconv.dual import build_dual, elastic_net_pair, quadratic_pair

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def _abs_model():
    # f = |x| on the real line, carried as the simple part with f = 0
    return ObjectiveModel(
        dim=1,
        smooth_value=lambda x: 0.0,
        smooth_gradient=lambda x: np.zeros(1),
        smooth_lipschitz=1.0,
        critical_set=SinglePoint([0.0]),
        simple=SeparablePart.l1(1, 1.0),
        smooth_is_zero=True,
    )


def _shifted_l1_model():
    # 0.5 ||x - (2, 0)||^2 + ||x||_1
    b = np.array([2.0, 0.0])
    return ObjectiveModel(
        dim=2,
        smooth_value=lambda x: 0.5 * float((x - b) @ (x - b)),
        smooth_gradient=lambda x: x - b,
        smooth_lipschitz=1.0,
        critical_set=SinglePoint([1.0, 0.0], min_value=1.5),
        simple=SeparablePart.l1(2, 1.0),
    )


def _elastic_dual():
    A = np.array([[1.0, 0.5], [0.2, 1.0], [0.3, -0.4]])
    return build_dual(elastic_net_pair(1.0, 1.0), A, A @ np.array([1.5, -2.0]))


def shipped_models():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 3))
    return {
        "quad14": problems.make_strongly_convex_quadratic(np.diag([1.0, 4.0]), [0.0, 0.0]),
        "quad_shift": problems.make_strongly_convex_quadratic(np.diag([1.0, 4.0]), [1.0, 4.0]),
        "ls11": problems.make_rank_deficient_least_squares([[1.0, 1.0]], [1.0]),
        "lasso_id": problems.make_lasso(np.eye(2), [2.0, 0.0], 1.0),
        "lasso_rand": problems.make_lasso(A, A @ np.array([1.0, -0.5, 0.0]), 0.1),
        "box_l1": problems.make_box_l1_scalar(),
        "invex": problems.make_invex_1d(),
        "quartic": problems.make_quartic_1d(),
        "desk": problems.make_composite_desk(),
        "palm": problems.make_palm_problem([[1.0, 1.0], [0.0, 1.0]], [1.0, 0.5], [1, 1],
                                           ["zero", ("l1", 0.1)]),
        "two_wells": problems.make_two_wells(),
        "dual_quad": build_dual(quadratic_pair(1.0, m=1), [[1.0], [1.0]], [1.0, 1.0]),
        "dual_enet": _elastic_dual(),
    }


SHIPPED = shipped_models()


def applicable_operators(model):
    ops = [ProxGradientResidual(1.0 / model.smooth_lipschitz), LeastNormSubgradient(),
           CompositeG(model.smooth_lipschitz)]
    if model.is_smooth:
        ops.append(Gradient())
    if model.smooth_is_zero or (model.is_smooth and model.smooth_prox is not None):
        ops.append(MoreauGradient(0.7))
    return ops


# --------------------------------------------------------------------------- evaluate


def test_evaluate_centered_quadratic_at_origin():
    q = problems.make_strongly_convex_quadratic(np.eye(2), [0.0, 0.0])
    assert evaluate(q, [0.0, 0.0]) == 0.0


def test_evaluate_on_critical_line():
    assert evaluate(SHIPPED["ls11"], np.array([1.0, 0.0])) == 0.0


def test_evaluate_sums_smooth_and_simple_parts():
    # 0.5 * ||(1,0) - (2,0)||^2 + |1| = 0.5 + 1
    assert evaluate(_shifted_l1_model(), np.array([1.0, 0.0])) == pytest.approx(1.5, abs=1e-15)


def test_evaluate_is_infinite_outside_box(box_l1):
    assert evaluate(box_l1, np.array([3.0])) == math.inf


def test_evaluate_rejects_nonfinite_smooth_value():
    bad = ObjectiveModel(1, lambda x: float("nan"), lambda x: np.zeros(1), 1.0, SinglePoint([0.0]))
    with pytest.raises(MalformedModelError):
        evaluate(bad, np.zeros(1))


def test_as_point_rejects_nonfinite_and_empty():
    with pytest.raises(ValueError):
        as_point([1.0, np.inf])
    with pytest.raises(ValueError):
        as_point([])


# --------------------------------------------------------------------------- critical sets


def test_distance_and_projection_to_line(ls11):
    assert distance_to_critical(ls11, [0.0, 0.0]) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    np.testing.assert_allclose(project_to_critical(ls11, [0.0, 0.0]), [0.5, 0.5], atol=1e-15)


def test_single_point_distance_and_projection():
    sp = SinglePoint([0.0, 0.0])
    assert sp.distance(np.array([3.0, 4.0])) == 5.0
    np.testing.assert_array_equal(sp.project(np.array([7.0, -1.0])), [0.0, 0.0])


def test_finite_set_tie_breaks_lexicographically():
    fs = FiniteSet(([1.0, 0.0], [-1.0, 0.0]))
    x = np.zeros(2)
    assert fs.distance(x) == 1.0
    np.testing.assert_array_equal(fs.project(x), [-1.0, 0.0])
    assert len(fs.nearest(x)) == 2


def test_unsolved_numeric_oracle_raises():
    with pytest.raises(ValueError, match="not solved"):
        NumericOracle(None, 1e-12).distance(np.zeros(2))


def test_inconsistent_affine_set_rejected():
    with pytest.raises(ValueError):
        AffineSet([[1.0, 1.0], [1.0, 1.0]], [0.0, 1.0])


@given(st.lists(finite, min_size=2, max_size=2))
def test_affine_projection_lands_on_set_and_is_idempotent(x):
    crit = SHIPPED["ls11"].critical_set
    p = crit.project(np.array(x))
    assert abs(p.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(crit.project(p), p, atol=1e-14)


@given(st.floats(-50, 50))
def test_affine_set_points_have_vanishing_residuals(s):
    for name in ("ls11", "dual_quad", "dual_enet"):
        model = SHIPPED[name]
        crit = model.critical_set
        x = crit.anchor + s * crit.null_basis[:, 0]
        for op in applicable_operators(model):
            assert np.linalg.norm(residual(model, op, x)) <= 1e-10 * max(1.0, abs(s))


# --------------------------------------------------------------------------- residuals


def test_gradient_of_diagonal_quadratic(quad14):
    np.testing.assert_array_equal(residual(quad14, Gradient(), np.array([1.0, 1.0])), [1.0, 4.0])


def test_prox_gradient_residual_by_soft_threshold():
    r = residual(_shifted_l1_model(), ProxGradientResidual(1.0), np.array([2.0, 0.0]))
    np.testing.assert_array_equal(r, [1.0, 0.0])


def test_moreau_gradient_of_absolute_value():
    # prox_{|.|}(3) = 2 so the envelope gradient is 3 - 2
    m = _abs_model()
    np.testing.assert_array_equal(objective_prox(m, np.array([3.0]), 1.0), [2.0])
    np.testing.assert_array_equal(residual(m, MoreauGradient(1.0), np.array([3.0])), [1.0])


def test_least_norm_subgradient_at_kink_and_smooth_point():
    m = _shifted_l1_model()
    # at (1, 0): grad f = (-1, 0); |x1| contributes +1, |x2| contributes [-1, 1]
    np.testing.assert_array_equal(residual(m, LeastNormSubgradient(), np.array([1.0, 0.0])), [0, 0])
    # at (0.5, 0.5): grad f = (-1.5, 0.5), plus (1, 1)
    np.testing.assert_allclose(residual(m, LeastNormSubgradient(), np.array([0.5, 0.5])),
                               [-0.5, 1.5])


def test_least_norm_subgradient_outside_domain(box_l1):
    with pytest.raises(OutsideDomain):
        residual(box_l1, LeastNormSubgradient(), np.array([2.5]))


def test_least_norm_uses_normal_cone_at_box_bound(box_l1):
    # at x = 2 the subdifferential is [1, inf), least-norm element 1
    np.testing.assert_array_equal(residual(box_l1, LeastNormSubgradient(), np.array([2.0])), [1.0])


def test_prox_gradient_step_must_not_exceed_inverse_lipschitz(quad14):
    with pytest.raises(ValueError, match="exceeds"):
        residual(quad14, ProxGradientResidual(0.5), np.ones(2))


def test_moreau_gradient_needs_full_prox(lasso_id):
    with pytest.raises(ValueError, match="proximal map"):
        residual(lasso_id, MoreauGradient(1.0), np.ones(2))


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_residuals_vanish_exactly_on_critical_points(name):
    model = SHIPPED[name]
    rng = np.random.default_rng(1)
    for op in applicable_operators(model):
        for p in model.critical_set.points():
            assert np.linalg.norm(residual(model, op, p)) <= 1e-9, (name, op)
        hits = 0
        for _ in range(20):
            x = model.critical_set.points()[0] + 0.3 * rng.standard_normal(model.dim)
            if model.critical_set.distance(x) < 1e-6:
                continue
            try:
                r = residual(model, op, x)
            except OutsideDomain:
                continue
            assert np.linalg.norm(r) > 0, (name, op, x)
            hits += 1
        assert hits > 0


# --------------------------------------------------------------------------- prox_linearized


def test_prox_linearized_gradient_step_on_quadratic():
    q = problems.make_strongly_convex_quadratic(np.eye(2), [0.0, 0.0])
    np.testing.assert_array_equal(prox_linearized(q, 1.0, np.array([2.0, 0.0])), [0.0, 0.0])


@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(2.5, 20))
def test_prox_linearized_on_first_coordinate_square(y1, y2, L):
    sq = ObjectiveModel(
        dim=2,
        smooth_value=lambda x: float(x[0] ** 2),
        smooth_gradient=lambda x: np.array([2 * x[0], 0.0]),
        smooth_lipschitz=2.0,
        critical_set=AffineSet([[1.0, 0.0]], [0.0]),
    )
    p = prox_linearized(sq, L, np.array([y1, y2]))
    np.testing.assert_allclose(p, [y1 - 2 * y1 / L, y2], rtol=1e-15, atol=1e-15)


def test_prox_linearized_shrinks_then_clamps(box_l1):
    np.testing.assert_array_equal(prox_linearized(box_l1, 1.0, np.array([3.0])), [2.0])
    np.testing.assert_array_equal(prox_linearized(box_l1, 1.0, np.array([0.5])), [0.0])


def test_prox_linearized_rejects_non_positive_l(box_l1):
    with pytest.raises(ValueError):
        prox_linearized(box_l1, 0.0, np.array([1.0]))


# --------------------------------------------------------------------------- property suites


def _fd_gradient(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("name", sorted(SHIPPED))
@given(data=st.data())
def test_gradient_matches_central_differences(name, data):
    model = SHIPPED[name]
    x = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=model.dim, max_size=model.dim)))
    g = model.smooth_gradient(x)
    fd = _fd_gradient(model.smooth_value, x)
    assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


@given(
    x=st.floats(-5, 5),
    t=st.floats(0.05, 3.0),
    w=st.floats(0.0, 2.0),
    lo=st.floats(-3.0, 0.0),
    width=st.floats(0.0, 4.0),
)
def test_separable_prox_matches_grid_minimizer(x, t, w, lo, width):
    g = SeparablePart(np.array([w]), np.array([lo]), np.array([lo + width]))
    p = g.prox(np.array([x]), t)[0]
    # brute force: objective on a 1e-4 grid over the box, clipped to a window around x
    a = max(lo, x - 6.0)
    b = min(lo + width, x + 6.0)
    if a > b:
        a = b = lo if x < lo else lo + width
    u = np.arange(a, b + 1e-4, 1e-4)
    u = np.clip(u, lo, lo + width)
    obj = w * np.abs(u) + (u - x) ** 2 / (2 * t)
    assert abs(u[np.argmin(obj)] - p) <= 2e-4


@given(st.floats(-5, 5), st.floats(0.1, 3.0))
def test_soft_threshold_matches_prox_of_l1(x, t):
    assert soft_threshold(x, t) == SeparablePart.l1(1, 1.0).prox(np.array([x]), t)[0]


def _grid_envelope(fun, x, lam, lo=-12.0, hi=12.0):
    u = np.linspace(lo, hi, 240_001)
    return float(np.min(fun(u) + (u - x) ** 2 / (2 * lam)))


ENVELOPE_CASES = {
    "abs": (_abs_model(), lambda u: np.abs(u)),
    "half_square": (problems.make_strongly_convex_quadratic([[1.0]], [0.0]), lambda u: 0.5 * u**2),
    "box_l1": (problems.make_box_l1_scalar(),
               lambda u: np.where(np.abs(u) <= 2, np.abs(u), np.inf)),
}


@pytest.mark.parametrize("case", sorted(ENVELOPE_CASES))
@given(x=st.floats(-6, 6), lam=st.floats(0.2, 3.0))
def test_moreau_envelope_matches_grid_minimization(case, x, lam):
    model, fun = ENVELOPE_CASES[case]
    env = moreau_envelope(model, lam, np.array([x]))
    assert env == pytest.approx(_grid_envelope(fun, x, lam), abs=1e-6)


def test_box_l1_envelope_closed_form_agrees_with_prox(box_l1):
    xs = np.linspace(-6, 6, 241)
    closed = problems.box_l1_envelope(xs)
    direct = [moreau_envelope(box_l1, 1.0, np.array([x])) for x in xs]
    np.testing.assert_allclose(closed, direct, atol=1e-14)
    assert problems.box_l1_envelope(0.0) == 0.0


@pytest.mark.parametrize("case", sorted(ENVELOPE_CASES))
@given(x=finite, y=finite, lam=st.floats(0.2, 3.0))
def test_moreau_gradient_is_inverse_lambda_lipschitz(case, x, y, lam):
    model, _ = ENVELOPE_CASES[case]
    if x == y:
        return
    gx = residual(model, MoreauGradient(lam), np.array([x]))
    gy = residual(model, MoreauGradient(lam), np.array([y]))
    assert abs(gx[0] - gy[0]) / abs(x - y) <= 1 / lam + 1e-9


@pytest.mark.parametrize("name", ["lasso_id", "lasso_rand", "box_l1", "desk", "palm", "quad14"])
@given(data=st.data())
def test_prox_gradient_residual_dominated_by_least_norm_subgradient(name, data):
    model = SHIPPED[name]
    x = np.array(data.draw(st.lists(st.floats(-1.9, 1.9), min_size=model.dim,
                                    max_size=model.dim)))
    t = data.draw(st.floats(0.01, 1.0)) / model.smooth_lipschitz
    r = residual(model, ProxGradientResidual(t), x)
    s = residual(model, LeastNormSubgradient(), x)
    assert np.linalg.norm(r) <= np.linalg.norm(s) + 1e-9


@pytest.mark.parametrize("case", sorted(ENVELOPE_CASES))
@given(x=st.floats(-1.9, 1.9), lam=st.floats(0.1, 3.0))
def test_moreau_gradient_dominated_by_least_norm_subgradient(case, x, lam):
    model, _ = ENVELOPE_CASES[case]
    m = residual(model, MoreauGradient(lam), np.array([x]))
    s = residual(model, LeastNormSubgradient(), np.array([x]))
    assert abs(m[0]) <= abs(s[0]) + 1e-9


# --------------------------------------------------------------------------- misc


def test_models_and_parts_are_immutable(quad14):
    with pytest.raises(Exception):
        quad14.smooth_lipschitz = 3.0
    part = SeparablePart.l1(2, 1.0)
    with pytest.raises(ValueError):
        part.weight[0] = 5.0


def test_model_validation():
    with pytest.raises(MalformedModelError):
        ObjectiveModel(1, lambda x: 0.0, lambda x: x, 0.0, SinglePoint([0.0]))
    from ebconv.core import Block

    with pytest.raises(MalformedModelError):
        ObjectiveModel(2, lambda x: 0.0, lambda x: x, 1.0, SinglePoint([0.0, 0.0]),
                       blocks=(Block(0, 1, 1.0), Block(2, 1, 1.0)))


def test_region_membership(quad14):
    reg = Region(0.5)
    assert reg.contains(quad14, np.array([1.0, 0.0]))
    assert not reg.contains(quad14, np.array([0.0, 1.0]))
    restricted = Region(10.0, domain_restriction=lambda x: x[0] >= 0)
    assert not restricted.contains(quad14, np.array([-0.1, 0.0]))


def test_reference_minimizer_reaches_soft_threshold_point():
    x, res = reference_minimizer(lambda x: x - np.array([2.0, 0.5]), 1.0,
                                 SeparablePart.l1(2, 1.0), np.zeros(2))
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-12)
    assert res <= 1e-12


def test_numeric_oracle_minimum_matches_objective(random_lasso):
    crit = random_lasso.critical_set
    assert evaluate(random_lasso, crit.x_ref) == pytest.approx(crit.min_value, abs=1e-14)
