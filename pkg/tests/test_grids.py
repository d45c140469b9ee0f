import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fpt_fredholm import (
    Boundary,
    CollocationGrid,
    DensityGrid,
    TailModel,
    graded_nodes,
    graded_weights,
    ig_cdf,
    ig_density,
)
from fpt_fredholm.errors import ValidationError


def test_graded_nodes_cluster_at_zero():
    s = graded_nodes(8.0, 5)
    assert np.allclose(s, 8.0 * np.linspace(0, 1, 5) ** 2)
    assert s[0] == 0.0 and s[-1] == 8.0


@pytest.mark.parametrize("k", [0, 1])
def test_graded_weights_exact_for_low_degree(k):
    # s^k is a polynomial of degree 2k + 1 in u, within the end correction's reach
    T = 3.0
    s, w = graded_nodes(T, 60), graded_weights(T, 60)
    assert w @ s**k == pytest.approx(T ** (k + 1) / (k + 1), rel=1e-13)


@pytest.mark.parametrize("k", [2, 3])
def test_graded_weights_converge_for_higher_degree(k):
    T = 3.0
    errs = [abs(graded_weights(T, n) @ graded_nodes(T, n) ** k - T ** (k + 1) / (k + 1)) for n in (50, 100)]
    assert errs[0] / errs[1] > 12


def test_graded_weights_fourth_order():
    T = 8.0
    errs = []
    for n in (50, 100, 200):
        s, w = graded_nodes(T, n), graded_weights(T, n)
        errs.append(abs(w @ ig_density(1.0, s) - ig_cdf(1.0, T)))
    assert errs[0] / errs[1] > 10 and errs[1] / errs[2] > 10


def test_few_nodes_fall_back_to_trapezoid():
    w = graded_weights(1.0, 3, gamma=1.0)
    assert np.allclose(w, [0.25, 0.5, 0.25])


def test_collocation_grid_scaling_and_checks():
    b = Boundary.constant(2.0)
    g = CollocationGrid.from_values([1.0, 3.0], b)
    assert np.allclose(g.scaling, np.exp([-2.0, -6.0]))
    assert len(CollocationGrid.geometric(1.0, 8.0, 4, b)) == 4
    with pytest.raises(ValidationError):
        CollocationGrid.from_values([], b)
    with pytest.raises(ValidationError):
        CollocationGrid.from_values([2.0, 1.0], b)
    with pytest.raises(ValidationError):
        CollocationGrid.from_values([0.5, 1.0], Boundary.linear(1.0, 0.5))


@pytest.mark.parametrize("s, f", [
    ([0.1, 1.0], [0.0, 0.0]),
    ([0.0, 1.0, 1.0], [0.0, 0.0, 0.0]),
    ([0.0, 1.0], [0.0, -0.1]),
    ([0.0, 1.0], [0.0, np.nan]),
    ([0.0, 1.0], [3.0, 3.0]),
])
def test_invalid_density_grids(s, f):
    with pytest.raises(ValidationError):
        DensityGrid.from_values(s, f)


def test_spline_interpolation_is_fourth_order():
    errs = []
    for n in (50, 100, 200):
        s = graded_nodes(4.0, n)
        d = DensityGrid.from_values(s, ig_density(1.0, s))
        x = np.linspace(0.05, 4.0, 3001)
        errs.append(np.max(np.abs(d.evaluate(x) - ig_density(1.0, x))))
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12


def test_evaluate_uses_tail_beyond_T():
    s = graded_nodes(2.0, 20)
    tail = TailModel(2.0, 0.5, 0.0, 1.0)
    d = DensityGrid.from_values(s, np.full(20, 0.1), tail=tail)
    assert d.evaluate(np.array([4.0]))[0] == pytest.approx(0.5 * ig_density(1.0, 4.0) / ig_density(1.0, 2.0))
    assert DensityGrid.from_values(s, np.full(20, 0.1)).evaluate(np.array([4.0]))[0] == 0.0


def test_tail_mass_of_exact_tail():
    T = 5.0
    d = DensityGrid.from_values(graded_nodes(T, 10), np.zeros(10),
                                tail=TailModel(T, float(ig_density(1.0, T)), 0.0, 1.0))
    assert d.tail_mass() == pytest.approx(1.0 - ig_cdf(1.0, T), abs=1e-10)


def test_cdf_against_closed_form():
    s = graded_nodes(8.0, 200)
    d = DensityGrid.from_values(s, ig_density(1.0, s))
    t = np.array([0.0, 0.5, 1.0, 3.0, 8.0])
    assert np.allclose(d.cdf(t), ig_cdf(1.0, t), atol=1e-6)
    assert d.cdf(1.0) == pytest.approx(0.3173, abs=1e-4)


@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(0.0, 1.0)))
def test_spline_density_is_linear_in_data(values):
    n = values.size
    s = graded_nodes(1.0, n)
    a = DensityGrid.from_values(s, values * 0.3)
    b = DensityGrid.from_values(s, values[::-1] * 0.2)
    both = DensityGrid.from_values(s, values * 0.3 + values[::-1] * 0.2)
    x = np.linspace(0.0, 1.0, 97)
    assert np.allclose(both.evaluate(x), a.evaluate(x) + b.evaluate(x), rtol=1e-12, atol=1e-14)
