"""运行结果导出：JSON报告、CSV明细、精度矩阵与TMFG图"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from icc.app.schema.graph import SimilarityMatrix, TmfgGraph
from icc.app.schema.state import SparsePrecision

PathLike = Union[str, Path]


class ExportStore:
    """输出目录下的文件写入；所有JSON按key排序以保证逐字节可复现"""

    def _prepare(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_json(self, payload: Union[BaseModel, Any], path: PathLike) -> Path:
        path = self._prepare(path)
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="json")
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        return path

    def read_json(self, path: PathLike) -> Any:
        return json.loads(Path(path).read_text(encoding="utf-8"))

    def write_rows(self, rows: Sequence[BaseModel], path: PathLike, columns: Sequence[str]) -> Path:
        """pydantic行模型 → CSV（空列表只写表头）"""
        path = self._prepare(path)
        frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=list(columns))
        frame.to_csv(path, index=False)
        return path

    def write_segmentation(self, dates: pd.DatetimeIndex, labels: np.ndarray, path: PathLike) -> Path:
        path = self._prepare(path)
        frame = pd.DataFrame({"date": pd.DatetimeIndex(dates).strftime("%Y-%m-%d"), "state": np.asarray(labels, dtype=int)})
        frame.to_csv(path, index=False)
        return path

    def write_precision(self, precision: SparsePrecision, directory: PathLike, stem: str) -> Tuple[Path, Path]:
        """坐标格式CSV (i, j, value) + JSON头 (logdet, support_size, n)"""
        directory = Path(directory)
        rows, cols = np.nonzero(precision.matrix)
        csv_path = self._prepare(directory / f"{stem}.csv")
        pd.DataFrame({"i": rows, "j": cols, "value": precision.matrix[rows, cols]}).to_csv(csv_path, index=False)
        header = {
            "n": precision.n,
            "logdet": precision.logdet,
            "support_size": precision.support_size(),
            "sparse": precision.is_sparse,
        }
        return csv_path, self.write_json(header, directory / f"{stem}.json")

    def write_graph(self, graph: TmfgGraph, sim: SimilarityMatrix, directory: PathLike, stem: str) -> Tuple[Path, Path]:
        """边列表CSV (vertex_i, vertex_j, weight) + 团/分隔集JSON"""
        directory = Path(directory)
        edges = sorted(graph.edges)
        csv_path = self._prepare(directory / f"{stem}.csv")
        pd.DataFrame(
            {
                "vertex_i": [i for i, _ in edges],
                "vertex_j": [j for _, j in edges],
                "weight": [float(sim.weights[i, j]) for i, j in edges],
            }
        ).to_csv(csv_path, index=False)
        doc = {
            "n": graph.n,
            "seed_clique": list(graph.seed_clique),
            "cliques": [list(c) for c in graph.cliques],
            "separators": [list(s) for s in graph.separators],
            "total_weight": graph.total_weight(sim),
        }
        if sim.tickers:
            doc["tickers"] = list(sim.tickers)
        return csv_path, self.write_json(doc, directory / f"{stem}.json")


export_store = ExportStore()
