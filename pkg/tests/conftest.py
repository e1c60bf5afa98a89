import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from desne.synthetic import gaussian_blobs

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def write_csv(path, m):
    cols = [m.data] if m.labels is None else [m.data, m.labels[:, None]]
    np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g")
    return path


@pytest.fixture
def blob_csv(tmp_path):
    def make(n=120, d=6, k=3, seed=0, name="blobs.csv"):
        return write_csv(tmp_path / name, gaussian_blobs(n, d, k, seed=seed))

    return make


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
