import numpy as np
import pytest
import factory
from unittest.mock import MagicMock

from src.core.grid_domain import IntervalGrid
from src.core.levy_noise import FiniteAtoms, TruncatedStable
from src.core.spde_integrator import ModelParams, StepScheme
from src.models.core_models import CommandResult, SimulationError
from src.services.criterion_service import CriterionService
from src.services.ensemble_service import EnsembleService
from src.utils.parsers.config_parser import parse_config


# =============================================================================
# CONFIG FACTORIES
# =============================================================================

class ModelBlockFactory(factory.DictFactory):
    alpha = 1.0
    beta = 1.0
    m = 3.0


class GridBlockFactory(factory.DictFactory):
    length = 1.0
    n = 20


class InitialBlockFactory(factory.DictFactory):
    preset = "sine"
    amplitude = 1.0
    mode = 1


class SchemeBlockFactory(factory.DictFactory):
    dt = 1e-3
    jump_mode = "jump_adapted"
    blowup_threshold = 1e8


class EnsembleBlockFactory(factory.DictFactory):
    paths = 4
    master_seed = 7
    horizon = 0.05
    threads = 1


class ExperimentDictFactory(factory.DictFactory):
    """Raw TOML-shaped config mapping; nested blocks are overridable with block__key=..."""
    schema_version = 1
    model = factory.SubFactory(ModelBlockFactory)
    grid = factory.SubFactory(GridBlockFactory)
    initial = factory.SubFactory(InitialBlockFactory)
    scheme = factory.SubFactory(SchemeBlockFactory)
    ensemble = factory.SubFactory(EnsembleBlockFactory)


@pytest.fixture
def raw_config():
    """Factory for raw config mappings."""
    return ExperimentDictFactory


@pytest.fixture
def make_config(tmp_path):
    """Build a validated ExperimentConfig writing into a temporary directory."""
    def build(**overrides):
        raw = ExperimentDictFactory(**overrides)
        raw.setdefault("output", {"directory": str(tmp_path / "runs")})
        return parse_config(raw)
    return build


# =============================================================================
# NUMERICAL FIXTURES
# =============================================================================

@pytest.fixture
def unit_grid():
    """(0, 1) with 99 interior nodes, h = 0.01."""
    return IntervalGrid(1.0, 99)


@pytest.fixture
def focusing_params():
    return ModelParams(alpha=1.0, beta=1.0, m=3.0)


@pytest.fixture
def heat_params():
    return ModelParams(alpha=1.0, beta=0.0, m=3.0)


@pytest.fixture
def single_atom():
    """lambda = 2 delta_1."""
    return FiniteAtoms(((1.0, 2.0),))


@pytest.fixture
def stable_measure():
    return TruncatedStable(c=1.0, alpha_stab=0.5, r_min=0.1, r_max=1.0)


@pytest.fixture
def fine_scheme():
    return StepScheme(dt=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# =============================================================================
# SERVICE MOCKS
# =============================================================================

@pytest.fixture
def mock_criterion_service():
    """Create a mock criterion service for testing."""
    mock_service = MagicMock(spec=CriterionService)
    mock_service.run = MagicMock()
    return mock_service


@pytest.fixture
def mock_ensemble_service():
    """Create a mock ensemble service for testing."""
    mock_service = MagicMock(spec=EnsembleService)
    mock_service.run = MagicMock()
    return mock_service


@pytest.fixture
def sample_command_result(tmp_path):
    """Sample successful command result."""
    return CommandResult(
        command="criterion",
        run_directory=str(tmp_path),
        files={"json": str(tmp_path / "criterion.json")},
        table=[["quantity", "value"], ["verdict", "blow-up-predicted"]],
    )


@pytest.fixture
def sample_oracle_failure():
    return SimulationError(type="oracle_failure", message="failed oracles: l2_balance")
