"""Marking, refinement-loop, and history tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stresseq import (
    AdaptiveConfig,
    ConfigError,
    Material,
    ProblemError,
    RunHistory,
    StepRecord,
    StressEqError,
    adaptive_loop,
    attach_reference_errors,
    cook,
    doerfler_mark,
    manufactured_smooth,
)
from stresseq.problems import Problem


@pytest.fixture(scope="module")
def cook_history():
    return adaptive_loop(cook(), AdaptiveConfig(k=1, theta=0.5, max_steps=8))


# -- bulk marking ---------------------------------------------------------------


def test_doerfler_theta_one_marks_all_positive():
    marked = doerfler_mark(np.array([0.0, 1.0, 2.0, 0.0]), 1.0)
    assert np.array_equal(marked, [1, 2])


def test_doerfler_example_minimal_set():
    eta = np.array([3.0, 4.0, 0.0])
    marked = doerfler_mark(eta, 0.6)
    assert np.array_equal(marked, [1])
    # exhaustively: no smaller set reaches theta^2 * total
    total = float(np.sum(eta**2))
    assert 0.36 * total > 0.0  # the empty set never qualifies


def test_doerfler_all_equal_marks_quarter():
    eta = np.ones(7)
    marked = doerfler_mark(eta, 0.5)
    # ceil(0.25 * 7) elements, ties broken by ascending index
    assert np.array_equal(marked, [0, 1])


def test_doerfler_zero_field_marks_nothing():
    assert doerfler_mark(np.zeros(5), 0.5).size == 0


def test_doerfler_invalid_theta():
    for theta in (0.0, -0.5, 1.5):
        with pytest.raises(ConfigError):
            doerfler_mark(np.ones(3), theta)


@settings(max_examples=200, deadline=None)
@given(
    eta=st.lists(
        st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
        min_size=1,
        max_size=40,
    ),
    theta=st.floats(min_value=0.01, max_value=1.0),
)
def test_doerfler_criterion_and_minimality(eta, theta):
    eta = np.asarray(eta)
    marked = doerfler_mark(eta, theta)
    assert np.array_equal(marked, np.unique(marked))  # sorted, no repeats
    total = float(np.sum(eta**2))
    if total == 0.0:
        assert marked.size == 0
        return
    got = float(np.sum(eta[marked] ** 2))
    assert got >= theta**2 * total * (1.0 - 1e-12)
    # dropping the weakest marked element must break the criterion
    # (for theta == 1 equality holds only with every positive element)
    if marked.size:
        weakest = float(np.min(eta[marked] ** 2))
        if theta < 1.0:
            assert got - weakest < theta**2 * total * (1.0 + 1e-12)
        else:
            assert np.all(eta[marked] > 0.0)


# -- config validation ------------------------------------------------------------


def test_config_validation():
    AdaptiveConfig()  # defaults are valid
    with pytest.raises(ConfigError):
        AdaptiveConfig(k=3)
    with pytest.raises(ConfigError):
        AdaptiveConfig(theta=0.0)
    with pytest.raises(ConfigError):
        AdaptiveConfig(theta=1.2)
    with pytest.raises(ConfigError):
        AdaptiveConfig(max_steps=0)
    with pytest.raises(ConfigError):
        AdaptiveConfig(max_dofs=0)
    with pytest.raises(ConfigError):
        AdaptiveConfig(estimator="exotic")
    with pytest.raises(ConfigError):
        AdaptiveConfig(mode="random")


# -- loop behavior ------------------------------------------------------------------


def test_single_step_records_initial_mesh():
    problem = manufactured_smooth(Material(mu=1.0, inv_lambda=0.0), cells=2)
    history = adaptive_loop(problem, AdaptiveConfig(max_steps=1))
    assert len(history) == 1
    rec = history[0]
    assert rec.step == 0
    assert rec.mesh is problem.mesh
    assert rec.marked is None
    assert rec.error is not None  # analytic solution available
    assert rec.report.bound >= rec.error**2


def test_max_dofs_stops_early():
    problem = manufactured_smooth(Material(mu=1.0, inv_lambda=0.0), cells=2)
    history = adaptive_loop(
        problem, AdaptiveConfig(max_steps=50, theta=0.9, max_dofs=500)
    )
    assert len(history) < 50
    assert history[-1].n_dofs >= 500
    assert all(r.n_dofs < 500 for r in history.records[:-1])


def test_marking_concentrates_at_singular_corner(cook_history):
    """Every marked element sits at the clamped top corner of the panel."""
    for rec in cook_history.records[:-1]:
        mids = rec.mesh.vertices[rec.mesh.triangles[rec.marked]].mean(axis=1)
        dist = np.linalg.norm(mids - np.array([0.0, 0.44]), axis=1)
        assert np.mean(dist < 0.1) >= 0.9, f"step {rec.step}"


def test_eta_total_trends_down_with_small_wobble(cook_history):
    eta = cook_history.totals("eta_total")
    for i in range(1, len(eta) - 1):
        assert eta[i + 1] <= 1.05 * eta[i], f"step {i} -> {i + 1}"
    assert eta[-1] < eta[0]


def test_residual_sum_decreases(cook_history):
    sums = np.array(
        [float(np.sum(r.report.eta_R**2)) for r in cook_history.records]
    )
    assert np.all(np.diff(sums) < 0.0)


def test_adaptive_matches_uniform_rate_on_smooth_problem():
    """On a smooth problem, bulk marking recovers the uniform-mesh rate."""
    mat = Material(mu=1.0, inv_lambda=0.0)
    hist_a = adaptive_loop(
        manufactured_smooth(mat, cells=4),
        AdaptiveConfig(k=1, theta=0.7, max_steps=11),
    )
    sl_a = np.polyfit(
        np.log(hist_a.n_dofs[-6:]), np.log(hist_a.totals("eta_total")[-6:]), 1
    )[0]
    hist_u = adaptive_loop(
        manufactured_smooth(mat, cells=4),
        AdaptiveConfig(k=1, max_steps=6, mode="uniform", uniform_rounds=1),
    )
    sl_u = np.polyfit(
        np.log(hist_u.n_dofs[-4:]), np.log(hist_u.totals("eta_total")[-4:]), 1
    )[0]
    assert abs(sl_a - sl_u) <= 0.1 * abs(sl_u)
    assert sl_u < -0.9  # the uniform rate itself is the optimal one


def test_uniform_mode_squares_mesh_size():
    problem = manufactured_smooth(Material(mu=1.0, inv_lambda=0.0), cells=2)
    history = adaptive_loop(
        problem, AdaptiveConfig(max_steps=3, mode="uniform", uniform_rounds=2)
    )
    counts = [r.mesh.n_triangles for r in history.records]
    assert counts == [8, 32, 128]
    for rec in history.records:
        assert rec.marked is None


def test_history_rejects_stalled_dof_counts(cook_history):
    history = RunHistory()
    history.append(cook_history[1])
    with pytest.raises(StressEqError):
        history.append(cook_history[0])


def test_history_total_names(cook_history):
    for name in ("eta_A", "eta_B", "eta_C", "eta_total", "bound"):
        vals = cook_history.totals(name)
        assert vals.shape == (len(cook_history),)
        assert np.all(vals > 0.0)
    with pytest.raises(KeyError):
        cook_history.totals("mystery")


def test_loop_errors_carry_step_prefix():
    base = manufactured_smooth(Material(mu=1.0, inv_lambda=0.0), cells=2)

    def bad_load(x):
        raise ProblemError("load blew up")

    problem = Problem(
        name=base.name,
        mesh=base.mesh,
        material=base.material,
        load=type(base.load)(volume=bad_load, traction=None),
        exact=None,
    )
    with pytest.raises(ProblemError, match=r"^step 0: "):
        adaptive_loop(problem, AdaptiveConfig(max_steps=2))


# -- proxy reference errors ---------------------------------------------------------


def test_attach_reference_errors_skips_finest(cook_history):
    attach_reference_errors(cook_history, cook().material)
    n = len(cook_history)
    for rec in cook_history.records[: n - 2]:
        assert rec.error is not None and rec.error > 0.0
        assert rec.effectivity is not None
    assert cook_history[n - 2].error is None
    assert cook_history[n - 1].error is None
    errors = np.array([r.error for r in cook_history.records[: n - 2]])
    assert np.all(np.diff(errors) < 0.0)  # errors shrink under refinement
    # the guaranteed bound holds against the proxy at every reported step
    for rec in cook_history.records[: n - 2]:
        assert rec.error**2 <= rec.report.bound


def test_attach_reference_errors_short_history_noop():
    problem = manufactured_smooth(Material(mu=1.0, inv_lambda=0.0), cells=2)
    history = adaptive_loop(problem, AdaptiveConfig(max_steps=2, theta=0.9))
    before = [r.error for r in history.records]
    attach_reference_errors(history, problem.material)
    assert [r.error for r in history.records] == before
