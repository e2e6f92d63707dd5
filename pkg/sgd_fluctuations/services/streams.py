"""随机数子流管理

一个主种子；每个 (命名空间, 集合编号, 重复编号, 用途) 由 SeedSequence 的 spawn_key
派生出独立的 Philox 计数器流。同一编号的重复无论在哪个线程上跑，
抽到的随机数都相同。
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np

PURPOSES: Dict[str, int] = {
    "init": 0,
    "batch": 1,
    "noise": 2,
    "quadrature": 3,
    "bootstrap": 4,
    "reference": 5,
}


@dataclass(frozen=True, slots=True)
class RunStreams:
    """一次 SGD 运行使用的三条子流"""

    init: np.random.Generator
    batch: np.random.Generator
    noise: np.random.Generator

    @classmethod
    def from_generator(cls, rng: np.random.Generator) -> "RunStreams":
        """三个用途共用同一个生成器"""
        return cls(init=rng, batch=rng, noise=rng)


class StreamFactory:
    """按 (namespace, ensemble, replication, purpose) 派生生成器

    ensemble 区分同一命名空间下的多个集合，例如 CLT 实验中的各个 β。
    """

    def __init__(self, seed: int, namespace: int = 0, ensemble: int = 0):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if ensemble < 0:
            raise ValueError("ensemble index must be non-negative")
        self.seed = int(seed)
        self.namespace = int(namespace)
        self.ensemble = int(ensemble)

    def generator(self, replication: int, purpose: str) -> np.random.Generator:
        """返回对应子流的新生成器，每次调用都从流的起点开始"""
        if purpose not in PURPOSES:
            raise ValueError(f"unknown stream purpose {purpose!r}")
        if replication < 0:
            raise ValueError("replication index must be non-negative")
        sequence = np.random.SeedSequence(
            self.seed, spawn_key=(self.namespace, self.ensemble, int(replication), PURPOSES[purpose])
        )
        return np.random.Generator(np.random.Philox(sequence))

    def run_streams(self, replication: int) -> RunStreams:
        return RunStreams(
            init=self.generator(replication, "init"),
            batch=self.generator(replication, "batch"),
            noise=self.generator(replication, "noise"),
        )
