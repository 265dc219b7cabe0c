import json

import numpy as np
import pytest

from ebconv import problems
from ebconv.core import (
    AffineSet,
    CompositeG,
    Gradient,
    NumericOracle,
    ProxGradientResidual,
    Region,
    SinglePoint,
    evaluate,
    objective_prox,
    prox_linearized,
    residual,
)
from ebconv.eb import EBKind, SamplePlan, draw_samples, estimate_constant
from ebconv.solvers import fbs, gradient_descent


def test_quadratic_moduli_and_minimizer(quad14):
    assert quad14.strong_convexity == 1.0
    assert quad14.smooth_lipschitz == 4.0
    np.testing.assert_array_equal(quad14.critical_set.x_star, [0.0, 0.0])


def test_identity_quadratic_reached_in_one_step():
    q = problems.make_strongly_convex_quadratic(np.eye(2), [0.0, 0.0])
    assert q.strong_convexity == q.smooth_lipschitz == 1.0
    tr = gradient_descent(q, 1.0, [3.0, 4.0])
    np.testing.assert_array_equal(tr.x[1], [0.0, 0.0])


def test_shifted_quadratic_minimizer():
    q = problems.make_strongly_convex_quadratic(np.diag([1.0, 4.0]), [1.0, 4.0])
    np.testing.assert_allclose(q.critical_set.x_star, [1.0, 1.0], rtol=1e-15)
    assert q.critical_set.min_value == pytest.approx(-2.5, rel=1e-15)


def test_quadratic_rejects_non_spd():
    with pytest.raises(ValueError):
        problems.make_strongly_convex_quadratic([[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0])
    with pytest.raises(ValueError):
        problems.make_strongly_convex_quadratic([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])


def test_least_squares_line(ls11):
    assert ls11.smooth_lipschitz == pytest.approx(2.0, rel=1e-15)
    assert isinstance(ls11.critical_set, AffineSet)
    assert ls11.critical_set.min_value == 0.0
    assert ls11.critical_set.distance(np.array([0.3, 0.7])) <= 1e-15


def test_full_rank_least_squares_is_a_point():
    m = problems.make_rank_deficient_least_squares(np.eye(2), [0.0, 0.0])
    assert m.critical_set.is_singleton
    np.testing.assert_array_equal(m.critical_set.points()[0], [0.0, 0.0])


def test_least_squares_rejects_target_outside_range():
    with pytest.raises(ValueError, match="range"):
        problems.make_rank_deficient_least_squares([[1.0, 1.0], [1.0, 1.0]], [1.0, 0.0])


def test_least_squares_normal_direction_constant(ls11):
    # <grad f(x), x - x_p> = 2 d(x)^2 on every sample
    s = draw_samples(ls11, Gradient(), SamplePlan(Region(1.0), 300, seed=4))
    np.testing.assert_allclose(s.inner, 2 * s.d**2, rtol=1e-9, atol=1e-14)


def test_least_squares_minimum_confirmed_by_solver(ls11):
    tr = gradient_descent(ls11, "1/L", [3.0, -1.0])
    assert abs(tr.gap[-1]) <= 1e-10


def test_lasso_minimizers_by_soft_thresholding(lasso_id):
    np.testing.assert_array_equal(lasso_id.critical_set.points()[0], [1.0, 0.0])
    small = problems.make_lasso(np.eye(2), [0.5, 0.5], 1.0)
    np.testing.assert_array_equal(small.critical_set.points()[0], [0.0, 0.0])


def test_lasso_without_penalty_is_least_squares(ls11):
    m = problems.make_lasso([[1.0, 1.0]], [1.0], 0.0)
    assert isinstance(m.critical_set, AffineSet)
    x = np.array([2.0, -0.5])
    assert evaluate(m, x) == evaluate(ls11, x)
    assert m.critical_set.distance(x) == pytest.approx(ls11.critical_set.distance(x), rel=1e-15)


def test_general_lasso_uses_numeric_oracle(random_lasso):
    crit = random_lasso.critical_set
    assert isinstance(crit, NumericOracle)
    tr = fbs(random_lasso, 1 / random_lasso.smooth_lipschitz, np.zeros(3))
    assert np.linalg.norm(tr.final - crit.x_ref) <= 1e-9


def test_box_l1_prox_and_envelope(box_l1):
    assert objective_prox(box_l1, np.array([3.0]), 1.0)[0] == 2.0
    assert objective_prox(box_l1, np.array([0.5]), 1.0)[0] == 0.0
    assert problems.box_l1_envelope(0.0, 1.0) == 0.0


@pytest.mark.parametrize("x", [-1.5, -0.3, 0.0, 0.7, 1.9])
@pytest.mark.parametrize("y", [-3.7, -2.5, -1.2, -0.4, 0.0, 0.6, 1.5, 2.8, 3.9])
def test_envelope_linearization_closed_form(box_l1, x, y):
    # g_1(y) + g_1'(y) (x - y) with g_1'(y) = y - prox(y)
    p = prox_linearized(box_l1, 1.0, np.array([y]))
    direct = problems.box_l1_envelope(y) + (y - p[0]) * (x - y)
    assert problems.box_l1_envelope_linearization(x, y) == pytest.approx(direct, abs=1e-14)


def test_counterexample_closed_forms():
    ce = problems.make_composite_counterexample()
    y = np.array([1.0, 5.0])
    np.testing.assert_allclose(problems.counterexample_p(y, 2.0), [0.5, 5.0], rtol=1e-15)
    np.testing.assert_allclose(problems.counterexample_G(y, 2.0), [1.0, 0.0], rtol=1e-15)
    np.testing.assert_allclose(prox_linearized(ce, 2.0, y), [0.5, 5.0], rtol=1e-15)
    np.testing.assert_allclose(residual(ce, CompositeG(2.0), y), [1.0, 0.0], rtol=1e-15)
    for y2 in (-3.0, 0.0, 7.5):
        np.testing.assert_array_equal(problems.counterexample_G(np.array([0.0, y2]), 2.0), [0, 0])
        np.testing.assert_array_equal(residual(ce, CompositeG(2.0), np.array([0.0, y2])), [0, 0])


@pytest.mark.parametrize("L", [1.0, 2.0, 5.0])
def test_counterexample_closed_forms_match_solver(L):
    ce = problems.make_composite_counterexample()
    rng = np.random.default_rng(2)
    for _ in range(10):
        y = rng.normal(size=2)
        np.testing.assert_allclose(prox_linearized(ce, L, y), problems.counterexample_p(y, L),
                                   rtol=1e-13, atol=1e-15)


def test_palm_block_constants():
    m = problems.make_palm_problem([[1.0, 1.0]], [1.0], [1, 1], ["zero", "zero"])
    assert [b.lipschitz for b in m.blocks] == [1.0, 1.0]
    assert m.smooth_lipschitz == pytest.approx(2.0, rel=1e-15)
    assert len(m.blocks) == 2


def test_palm_rejects_bad_partition():
    with pytest.raises(ValueError):
        problems.make_palm_problem([[1.0, 1.0]], [1.0], [1, 2], ["zero", "zero"])
    with pytest.raises(ValueError):
        problems.make_palm_problem([[1.0, 1.0]], [1.0], [1, 1], ["zero"])


def test_palm_accepts_json_style_kinds():
    m = problems.make_palm_problem(np.eye(2), [1.0, 2.0], [1, 1],
                                   [{"l1": 0.5}, {"box": [-1.0, 1.0]}])
    assert m.simple.weight.tolist() == [0.5, 0.0]
    assert m.simple.upper.tolist() == [np.inf, 1.0]


def test_invex_critical_set_by_derivative_scan():
    m = problems.make_invex_1d()
    assert m.smooth_value(np.zeros(1)) == 0.0
    assert m.smooth_gradient(np.zeros(1))[0] == 0.0
    xs = np.arange(-10.0, 10.0 + 5e-4, 1e-3)
    g = np.array([m.smooth_gradient(np.array([x]))[0] for x in xs])
    sign = np.sign(g)
    changes = np.nonzero(np.diff(sign[sign != 0]))[0]
    assert len(changes) == 1
    # f' < 0 left of 0 and > 0 right of it
    assert np.all(g[xs < -1e-9] < 0) and np.all(g[xs > 1e-9] > 0)
    # curvature bound L = 8 = 2 + 6
    second = 2 + 6 * np.cos(2 * xs)
    assert np.max(np.abs(second)) <= m.smooth_lipschitz


def test_invex_cor_constant_positive():
    m = problems.make_invex_1d()
    nu = estimate_constant(m, Gradient(), EBKind.COR, SamplePlan(Region(1.0), 1000,
                                                                  strategy="grid"))
    assert nu >= 0.1


def test_two_wells_tie_uses_lexicographic_witness():
    m = problems.make_two_wells()
    assert m.critical_set.distance(np.array([0.0, 0.0])) == 1.0
    for p in m.critical_set.points():
        assert np.linalg.norm(m.smooth_gradient(p)) == 0.0


@pytest.mark.parametrize("name", ["quad", "ls", "lasso", "dual"])
def test_expected_constants_reproduced(name, quad14, ls11):
    from ebconv.dual import build_dual, quadratic_pair

    model, op = {
        "quad": (quad14, Gradient()),
        "ls": (ls11, Gradient()),
        "lasso": (problems.make_lasso(np.eye(2), [2.0, 0.0], 1.0), ProxGradientResidual(1.0)),
        "dual": (build_dual(quadratic_pair(1.0, m=1), [[1.0], [1.0]], [1.0, 1.0]), Gradient()),
    }[name]
    expected = model.expected_constants or {}
    names = {"kappa": EBKind.RES, "nu": EBKind.COR, "alpha": EBKind.OBJ,
             "eta": EBKind.RES_OBJ, "beta": EBKind.COR_RES, "omega": EBKind.COR_OBJ}
    samples = draw_samples(model, op, SamplePlan(Region(1.0), 1000, seed=0))
    for key, val in expected.items():
        est = estimate_constant(model, op, names[key], samples)
        assert est == pytest.approx(val, rel=0.05), key


def test_load_problem_from_json(tmp_path):
    doc = {"name": "q", "constructor": "strongly_convex_quadratic",
           "params": {"Q": [[1, 0], [0, 4]], "b": [0, 0]}}
    path = tmp_path / "q.json"
    path.write_text(json.dumps(doc))
    m = problems.load_problem(path)
    assert m.name == "q" and m.smooth_lipschitz == 4.0
    assert problems.problem_hash(path) == problems.problem_hash(doc)
    reordered = {"params": {"b": [0, 0], "Q": [[1, 0], [0, 4]]}, "constructor": doc["constructor"],
                 "name": "q"}
    assert problems.problem_hash(reordered) == problems.problem_hash(doc)


@pytest.mark.parametrize("doc", [
    {"constructor": "nope"},
    {"constructor": "lasso", "params": {"A": [[1.0]]}},
])
def test_load_problem_rejects_bad_documents(doc):
    with pytest.raises(ValueError):
        problems.load_problem(doc)


def test_every_constructor_loads():
    params = {
        "strongly_convex_quadratic": {"Q": [[2.0]], "b": [1.0]},
        "rank_deficient_least_squares": {"A": [[1, 1]], "b": [1]},
        "lasso": {"A": [[1, 0], [0, 1]], "b": [2, 0], "w": 1},
        "box_l1_scalar": {},
        "composite_counterexample": {},
        "palm": {"A": [[1, 1]], "b": [1], "block_sizes": [1, 1], "g_kinds": ["zero", "zero"]},
        "invex_1d": {},
        "quartic_1d": {},
        "composite_desk": {"mu_prime": 0.5},
        "two_wells": {},
        "dual": {"pair": "elastic_net", "A": [[1, 0], [0, 1]], "b": [2, -3], "w": 1},
    }
    assert set(params) == set(problems.CONSTRUCTORS)
    for ctor, p in params.items():
        m = problems.load_problem({"constructor": ctor, "params": p})
        assert m.dim >= 1


def test_single_point_models_are_critical_at_their_point():
    for m in (problems.make_box_l1_scalar(), problems.make_composite_desk(),
              problems.make_quartic_1d()):
        assert isinstance(m.critical_set, SinglePoint)
        assert evaluate(m, m.critical_set.x_star) == m.critical_set.min_value
