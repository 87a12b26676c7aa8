"""Shared fixtures: the reference beam and bell-field lens the suite reuses."""

import pytest
from hypothesis import HealthCheck, settings

from oamlens import AxialFieldModel, make_beam

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    max_examples=30,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def beam80():
    return make_beam(80e3)


@pytest.fixture(scope="session")
def ref_lens():
    # 2 T peak, 10 um half-width, 100 nm dispersion disc: f0 ~ 58 mm,
    # dispersion strength ~ 0.066 per unit of azimuthal order.
    return AxialFieldModel.glaser(peak_field=2.0, half_width=1e-5,
                                  dispersion_length=1e-7)
