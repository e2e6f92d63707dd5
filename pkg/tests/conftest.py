"""共享测试夹具"""

import numpy as np
import pytest

from sgd_fluctuations.config.settings import ExperimentConfig
from sgd_fluctuations.models.activation import ActivationSpec
from sgd_fluctuations.models.data_model import BatchSchedule, DataModel
from sgd_fluctuations.models.network import InitSpec, SGDConfig
from sgd_fluctuations.services.sgd_engine import SGDEngine


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ramp():
    return ActivationSpec()


@pytest.fixture
def smooth_ramp():
    return ActivationSpec.smooth(0.1)


@pytest.fixture
def model_1d():
    return DataModel.default(1)


@pytest.fixture
def model_3d():
    return DataModel.default(3)


@pytest.fixture
def make_engine():
    """按需构造小规模 SGD 引擎"""

    def factory(
        N=20,
        d=3,
        alpha=0.1,
        beta=1.0,
        noise_std=0.1,
        batch=1,
        init=None,
        seed=7,
        act=None,
    ):
        cfg = SGDConfig(
            N=N,
            d=d,
            alpha=alpha,
            beta=beta,
            noise_std=noise_std,
            batch=BatchSchedule.fixed(batch),
            init=init if init is not None else InitSpec.gaussian(),
            seed=seed,
        )
        return SGDEngine(cfg, DataModel.default(d), act if act is not None else ActivationSpec())

    return factory


@pytest.fixture
def small_config(tmp_path):
    """桌面测试规模的实验配置"""

    def factory(**overrides):
        base = dict(
            N=20,
            d=1,
            t_end=0.5,
            replications=4,
            threads=1,
            output_dir=str(tmp_path / "out"),
            emit_stride=0.1,
            mf_particles=50,
            mf_quadrature=100,
            mf_dt=0.1,
        )
        base.update(overrides)
        return ExperimentConfig(**base)

    return factory
