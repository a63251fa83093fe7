import os

import hypothesis
import pytest
from hypothesis import HealthCheck

hypothesis.settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None,
                                     suppress_health_check=[HealthCheck.too_slow])
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def sales():
    from csi_imitation.generators import sales_scm
    return sales_scm()
