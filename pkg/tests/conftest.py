import warnings

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_clip_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="clipping .* negative eigenvalues")
        yield
