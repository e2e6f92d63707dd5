"""CSV 结果文件读写

浮点数一律写 17 位有效数字，读回时用 round_trip 解析，保证逐位还原。
"""

import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import pandas as pd

from ..config.constants import CSV_HEADERS
from ..errors import ArtifactIOError
from ..models.fluctuation import FluctuationTrace
from ..models.measure import TraceSeries
from ..models.report import CLTReport, CLTSummary, DriftReport, VarianceReport
from .log import logger

FLOAT_FORMAT = "%.17g"

Series = Union[TraceSeries, FluctuationTrace]
Artifact = Union[Series, Sequence[Series], VarianceReport, CLTSummary, CLTReport, DriftReport]


def _trace_rows(trace: Series, seed: Optional[int]) -> pd.DataFrame:
    if isinstance(trace, FluctuationTrace):
        replication, probe, beta, n = trace.replication, trace.probe, trace.beta, trace.N
    else:
        meta = trace.meta
        replication = meta.get("replication")
        probe = meta.get("probe", "")
        beta = meta.get("beta", math.nan)
        n = meta.get("N")
        seed = meta.get("seed", seed) if seed is None else seed
    size = len(trace.grid)
    return pd.DataFrame(
        {
            "t": trace.grid,
            "value": trace.values,
            "replication": pd.array([replication] * size, dtype="Int64"),
            "probe": [probe] * size,
            "beta": [float(beta) if beta is not None else math.nan] * size,
            "N": pd.array([n] * size, dtype="Int64"),
            "seed": ["" if seed is None else str(seed)] * size,
        },
        columns=list(CSV_HEADERS["trace"]),
    )


def trace_frame(traces: Iterable[Series], seed: Optional[int] = None) -> pd.DataFrame:
    """每条轨迹每个网格点一行"""
    frames = [_trace_rows(trace, seed) for trace in traces]
    if not frames:
        return pd.DataFrame(columns=list(CSV_HEADERS["trace"]))
    return pd.concat(frames, ignore_index=True)


def variance_frame(report: VarianceReport) -> pd.DataFrame:
    """每个 |B| 一行点估计（bootstrap_id = -1）及其 bootstrap 行"""
    rows: List[dict] = []
    for entry in report.entries:
        rows.append({"batch_size": entry.batch_size, "V_hat": entry.v_hat, "bootstrap_id": -1})
        for b, value in enumerate(entry.bootstrap):
            rows.append({"batch_size": entry.batch_size, "V_hat": float(value), "bootstrap_id": b})
    return pd.DataFrame(rows, columns=list(CSV_HEADERS["variance"]))


def summary_frame(summaries: Iterable[CLTSummary]) -> pd.DataFrame:
    frames = [
        pd.DataFrame(
            {
                "t": s.grid,
                "beta": [s.beta] * s.grid.size,
                "mean": s.mean,
                "ci_lo": s.ci_lo,
                "ci_hi": s.ci_hi,
                "R": [s.replications] * s.grid.size,
            },
            columns=list(CSV_HEADERS["summary"]),
        )
        for s in summaries
    ]
    if not frames:
        return pd.DataFrame(columns=list(CSV_HEADERS["summary"]))
    return pd.concat(frames, ignore_index=True)


def to_frame(artifact: Artifact, seed: Optional[int] = None) -> pd.DataFrame:
    """把轨迹、报告或汇总转成对应格式的表"""
    if isinstance(artifact, (TraceSeries, FluctuationTrace)):
        return trace_frame([artifact], seed)
    if isinstance(artifact, VarianceReport):
        return variance_frame(artifact)
    if isinstance(artifact, CLTSummary):
        return summary_frame([artifact])
    if isinstance(artifact, (CLTReport, DriftReport)):
        return summary_frame(artifact.summaries)
    items = list(artifact)
    if items and isinstance(items[0], CLTSummary):
        return summary_frame(items)
    return trace_frame(items, seed)


def write_frame(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """覆盖写入 CSV，失败时抛出带路径的 ArtifactIOError"""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ArtifactIOError("cannot write CSV", str(target), cause=e) from e
    logger.debug(f"写入 {len(frame)} 行: {target}")
    return target


def emit_csv(artifact: Artifact, path: Union[str, Path], seed: Optional[int] = None) -> Path:
    """写出结果文件；seed 用于缺少种子信息的涨落轨迹"""
    return write_frame(to_frame(artifact, seed), path)


def read_csv_artifact(path: Union[str, Path]) -> pd.DataFrame:
    """读回 emit_csv 写出的文件，浮点数逐位还原"""
    target = Path(path)
    try:
        return pd.read_csv(target, float_precision="round_trip", dtype={"probe": str, "seed": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactIOError("cannot read CSV", str(target), cause=e) from e
