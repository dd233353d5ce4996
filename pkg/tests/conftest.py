import numpy as np
import pytest

from dive.bernstein import (
    LinkFunction,
    MonotoneCoefficients,
    ParametricCDF,
    ResponseScaler,
)


@pytest.fixture
def announce(capsys):
    """Print a line that survives pytest's capture (used by the acceptance suite)."""

    def _announce(line: str) -> None:
        with capsys.disabled():
            print(line)

    return _announce


def linear_index_cdf(slope, intercept, lower, upper, order=12, link="standard-normal"):
    """CDF whose pre-link index is exactly slope * y + intercept on [lower, upper].

    Linear functions are reproduced exactly by the Bernstein basis when the
    coefficients sample the line at j/order, which gives closed-form test
    objects like normal(mu, 1) via slope=1, intercept=-mu.
    """
    y_at = lower + (upper - lower) * np.arange(order + 1) / order
    theta = slope * y_at + intercept
    bound = max(15.0, np.max(np.abs(theta)) * 1.001 + 1e-9)
    return ParametricCDF(
        scaler=ResponseScaler(lower, upper),
        link=LinkFunction(link),
        coeffs=MonotoneCoefficients(theta=tuple(theta), bound=bound),
    )
