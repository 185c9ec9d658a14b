import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
SRC_PATH = PROJECT_ROOT / "src"
if str(SRC_PATH) not in sys.path:
    sys.path.insert(0, str(SRC_PATH))

from markov_lyapunov.linalg import MatrixFamily, rotation  # noqa: E402
from markov_lyapunov.markov import build_chain  # noqa: E402

ASSETS = PROJECT_ROOT / "assets"
BENCHMARK_T = [[0.9, 0.1], [0.2, 0.8]]
# (2/3) log 2 + (1/3) log(1/3)
CONFORMAL_GAMMA = (2.0 / 3.0) * np.log(2.0) + (1.0 / 3.0) * np.log(1.0 / 3.0)


def conformal_matrices():
    return [2.0 * rotation(1.1), (1.0 / 3.0) * rotation(0.4)]


def contracting_matrices():
    shear = np.array([[1.0, 1.0], [0.0, 1.0]])
    return [rotation(1.0) @ np.diag([2.0, 1.0]), shear @ np.diag([1.0, 0.8])]


@pytest.fixture()
def chain():
    return build_chain(BENCHMARK_T)


@pytest.fixture()
def conformal_family():
    return MatrixFamily.from_arrays(conformal_matrices())


@pytest.fixture()
def contracting_family():
    return MatrixFamily.from_arrays(contracting_matrices())


@pytest.fixture()
def diagonal_family():
    return MatrixFamily.from_arrays([np.diag([2.0, 1.0]), np.diag([3.0, 0.5])])


@pytest.fixture()
def rotation_family():
    # both matrices act on lines by the same irrational rotation
    return MatrixFamily.from_arrays([rotation(np.sqrt(2.0)), rotation(np.sqrt(2.0) + np.pi)])


@pytest.fixture()
def conformal_gamma():
    return CONFORMAL_GAMMA


@pytest.fixture()
def make_payload(tmp_path):
    """Small, fast config dicts for pipeline tests."""

    def factory(matrices=None, **overrides):
        payload = {
            "schema_version": "1",
            "mode": "all",
            "matrices": [np.asarray(m).tolist() for m in (matrices or conformal_matrices())],
            "transition": BENCHMARK_T,
            "grid_size": 64,
            "seed": 7,
            "mc": {"n": 400, "replicas": 8, "burn_in": 40},
            "spectrum": {
                "t_grid_points": 3,
                "gap_window": [5, 20],
                "gap_probes": 2,
                "lasota_yorke_steps": 5,
                "imaginary_t": [0.1],
                "imaginary_steps": 5,
                "grid_convergence": [32, 64],
            },
            "diagnostics": {
                "contraction_n": 3,
                "contraction_pairs": 100,
                "index_n": 5,
                "samples": 50,
                "ell_n": 5,
                "directions": 8,
                "irreducibility_length": 2,
            },
            "oracle": {"n_max": 3},
            "output": {"directory": str(tmp_path / "out")},
        }
        payload.update(overrides)
        return payload

    return factory


@pytest.fixture()
def make_context(make_payload):
    """RunContext for a small config; keyword overrides go to the payload."""

    from markov_lyapunov.runner import RunContext
    from markov_lyapunov.schemas import RunConfig

    def factory(matrices=None, *, workers=1, **overrides):
        config = RunConfig.from_dict(make_payload(matrices, **overrides))
        return RunContext.from_config(config, workers=workers)

    return factory
