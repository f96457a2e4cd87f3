import numpy as np
import pytest
from hypothesis import given, strategies as st

from sarpsim.integrate import IntegrationError, dopri5


def test_exponential_decay():
    y, _ = dopri5(lambda t, y: -y, 0.0, 5.0, np.ones((1, 1)), rtol=1e-10, atol=1e-12)
    assert abs(y[0, 0] - np.exp(-5.0)) < 1e-9


def test_batch_members_independent():
    rates = np.array([[-1.0], [-2.0], [0.5j]])
    y, _ = dopri5(lambda t, y: rates * y, 0.0, 2.0, np.ones((3, 1)), rtol=1e-10, atol=1e-12)
    assert np.allclose(y[:, 0], np.exp(2.0 * rates[:, 0]), atol=1e-8)


def test_dense_output_matches_solution():
    t_eval = np.linspace(0, 3, 31)
    _, ys = dopri5(lambda t, y: 1j * y, 0.0, 3.0, np.ones((1, 1)), rtol=1e-10, atol=1e-12,
                   t_eval=t_eval)
    assert np.max(np.abs(ys[:, 0, 0] - np.exp(1j * t_eval))) < 1e-7


def test_time_dependent_rhs():
    # y' = cos t  ->  y = sin t
    y, _ = dopri5(lambda t, y: np.full_like(y, np.cos(t)), 0.0, 4.0, np.zeros((1, 1)),
                  rtol=1e-10, atol=1e-12)
    assert abs(y[0, 0] - np.sin(4.0)) < 1e-9


def test_zero_span():
    y0 = np.ones((2, 3))
    y, _ = dopri5(lambda t, y: y, 1.0, 1.0, y0)
    assert np.array_equal(y, y0)


def test_step_limit_raises():
    with pytest.raises(IntegrationError):
        dopri5(lambda t, y: -1e6 * y, 0.0, 10.0, np.ones((1, 1)), max_steps=50)


@given(st.floats(0.1, 3.0), st.floats(0.1, 5.0))
def test_rotation_norm(omega, t1):
    y, _ = dopri5(lambda t, y: 1j * omega * y, 0.0, t1, np.ones((1, 1)), rtol=1e-9, atol=1e-11)
    assert abs(abs(y[0, 0]) - 1.0) < 1e-7
