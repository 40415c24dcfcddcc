import numpy as np
import pytest

from src.core.levy_noise import FiniteAtoms, TruncatedStable
from src.core.noise_models import AdditiveNoise, MultiplicativeNoise, kappa
from src.models.core_models import LevyBlock, NoiseBlock
from src.services.experiment_builder import build_experiment, build_levy, build_noise


MULTIPLICATIVE = {"kind": "multiplicative", "sigma": 0.5, "eta_profile": "linear", "eta_scale": 1.0}
ATOMS = {"kind": "atoms", "atoms": [[1.0, 2.0]]}


class TestBuildLevy:
    """Test the build_levy function."""

    def test_none(self):
        """Test that kind none gives no measure."""
        assert build_levy(LevyBlock()) is None

    def test_atoms(self):
        """Test building a finite atomic measure."""
        levy = build_levy(LevyBlock(kind="atoms", atoms=[[1.0, 2.0]]))

        assert isinstance(levy, FiniteAtoms)
        assert levy.atoms == ((1.0, 2.0),)

    def test_truncated_stable(self):
        """Test building a truncated stable measure."""
        levy = build_levy(LevyBlock(kind="truncated_stable", c=1.0, alpha_stab=0.5, r_min=0.1, r_max=1.0))

        assert isinstance(levy, TruncatedStable)

    def test_truncated_stable_missing_parameters(self):
        """Test that missing parameters are all named."""
        with pytest.raises(ValueError, match="alpha_stab, r_min, r_max"):
            build_levy(LevyBlock(kind="truncated_stable", c=1.0))


class TestBuildNoise:
    """Test the build_noise function."""

    def test_none(self):
        """Test that kind none gives no noise."""
        assert build_noise(NoiseBlock(), None, 1.0) is None

    def test_additive_preset_params_filtered(self):
        """Test that presets only receive the parameters they accept."""
        block = NoiseBlock(kind="additive", preset="steady_sine", sigma_scale=2.0, decay_rate=3.0, decay_horizon=4.0)

        noise = build_noise(block, None, 2.0)

        assert isinstance(noise, AdditiveNoise)
        assert noise.decay_horizon == 4.0
        assert noise.sigma(np.array([1.0]), 3.0)[0] == pytest.approx(2.0)

    def test_additive_needs_horizon(self):
        """Test that additive noise needs its decay horizon."""
        with pytest.raises(ValueError):
            build_noise(NoiseBlock(kind="additive", preset="decaying_sine"), None, 1.0)

    def test_multiplicative(self, single_atom):
        """Test building multiplicative noise."""
        noise = build_noise(NoiseBlock(**MULTIPLICATIVE), single_atom, 1.0)

        assert isinstance(noise, MultiplicativeNoise)
        assert kappa(noise, single_atom) == pytest.approx(0.5 * (0.25 + 2.0))


class TestExperiment:
    """Test the Experiment variations used by the sweep."""

    def test_build(self, make_config):
        """Test that a config becomes grid, initial data and scheme."""
        experiment = build_experiment(make_config(initial__amplitude=2.0, ensemble__record_stride=5))

        assert experiment.grid.n == 20
        assert experiment.u0.values.max() == pytest.approx(2.0 * np.sin(np.pi * 10 / 21))
        assert experiment.scheme.record_stride == 5
        assert experiment.mode == "additive"
        assert experiment.blowup_threshold == 1e8

    def test_ensemble_config_overrides(self, make_config):
        """Test that ensemble settings can be overridden per run."""
        config = build_experiment(make_config()).ensemble_config(paths=9, horizon=0.2, keep_records=True)

        assert config.paths == 9
        assert config.horizon == 0.2
        assert config.master_seed == 7
        assert config.keep_records

    def test_with_amplitude(self, make_config):
        """Test rebuilding with another amplitude."""
        experiment = build_experiment(make_config()).with_amplitude(3.0)

        assert experiment.config.initial.amplitude == 3.0
        assert experiment.u0.values.max() == pytest.approx(3.0 * np.sin(np.pi * 10 / 21))

    def test_with_noise_scale(self, make_config):
        """Test that the noise scale sets both the Brownian and the jump scale."""
        base = build_experiment(make_config(noise={"kind": "additive", "preset": "decaying_sine", "decay_horizon": 5.0}))

        scaled = base.with_noise_scale(0.7)

        assert scaled.config.noise.sigma_scale == 0.7
        assert scaled.config.noise.eta_scale == 0.7

    def test_with_noise_scale_needs_noise(self, make_config):
        """Test that a noise scale needs a noise block."""
        with pytest.raises(ValueError):
            build_experiment(make_config()).with_noise_scale(1.0)

    def test_with_kappa(self, make_config):
        """Test that sigma is chosen to hit the requested kappa."""
        base = build_experiment(make_config(noise=dict(MULTIPLICATIVE), levy=dict(ATOMS)))

        tuned = base.with_kappa(3.0)

        assert kappa(tuned.noise, tuned.levy) == pytest.approx(3.0)
        assert tuned.config.noise.sigma == pytest.approx(2.0)

    def test_with_kappa_below_jump_part(self, make_config):
        """Test that kappa below the jump contribution is rejected."""
        base = build_experiment(make_config(noise=dict(MULTIPLICATIVE), levy=dict(ATOMS)))

        with pytest.raises(ValueError, match="below the jump contribution"):
            base.with_kappa(0.5)
