import hypothesis
import pytest

hypothesis.settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    from boundarylab.simulate import RngStream

    return RngStream(20240, 0).generator()


def make_rng(stream_id: int):
    from boundarylab.simulate import RngStream

    return RngStream(20240, stream_id).generator()
