"""平均场 ODE 作为 μ̄ 的参考"""

from typing import Any, Dict, Optional

import numpy as np

from ..models.activation import ActivationSpec
from ..models.data_model import DataModel
from ..models.meanfield import MeanFieldTrajectory, QuadratureSample
from ..models.measure import TestFunction, TraceSeries
from ..models.network import InitSpec
from ..services.meanfield import integrate, reference_trace
from ..utils.log import logger
from .source import ReferenceProvider


class MeanFieldReferenceProvider(ReferenceProvider):
    """P 个粒子 + 固定求积样本的 ODE 解"""

    def __init__(
        self,
        model: DataModel,
        act: ActivationSpec,
        alpha: float,
        init: InitSpec,
        particles: int,
        quadrature: QuadratureSample,
        dt: float,
        rng: np.random.Generator,
        integrator: str = "rk4",
        stride: int = 1,
    ):
        self.model = model
        self.act = act
        self.alpha = alpha
        self.quadrature = quadrature
        self.dt = dt
        self.integrator = integrator
        self.stride = stride
        self._init_particles = init.sample(rng, particles, model.d)
        self._trajectory: Optional[MeanFieldTrajectory] = None

    def trajectory(self, t_end: float) -> MeanFieldTrajectory:
        """积分到 t_end，已有更长的轨迹时直接复用"""
        if self._trajectory is None or self._trajectory.t_end < t_end:
            logger.info(
                f"积分平均场参考: P={self._init_particles.shape[0]}, "
                f"Q={self.quadrature.size}, dt={self.dt}, t_end={t_end}"
            )
            self._trajectory = integrate(
                self._init_particles,
                self.quadrature,
                self.act,
                self.alpha,
                t_end,
                self.dt,
                self.integrator,
                self.stride,
            )
        return self._trajectory

    def reference_trace(self, probe: TestFunction, t_end: float) -> TraceSeries:
        return reference_trace(self.trajectory(t_end), probe)

    def get_source_info(self) -> Dict[str, Any]:
        return {
            "name": "meanfield",
            "P": int(self._init_particles.shape[0]),
            "Q": self.quadrature.size,
            "dt": self.dt,
            "integrator": self.integrator,
            "stride": self.stride,
        }
