import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from base.voa_base import BaseSimilarity, ObservationMismatchError, VoaInputError
from base.voa_observation import Observation, check_compatible
from utils import voa_utils

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Similarity")


def build_metric(name: str, params: Optional[Dict[str, Any]] = None) -> BaseSimilarity:
    """
    Instantiate a similarity metric by name or tau alias ("tau2" -> exp_norm).
    """
    names = voa_utils.resolve_component_names(None, name)
    try:
        metric_class = voa_utils.dynamic_import(names["metric_module"], names["metric_class"])
    except ImportError as e:
        raise VoaInputError(f"unknown similarity metric '{name}': {e}") from e
    return metric_class(params)


def similarity(metric: BaseSimilarity, a: Observation, b: Observation) -> float:
    check_compatible(a, b)
    if a.kind not in metric.supported_kinds:
        raise ObservationMismatchError(f"metric '{metric.name}' does not accept {a.kind} observations")
    score = float(metric.score(a, b))
    return min(1.0, max(0.0, score))


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    row_ids: Tuple[str, ...]
    col_ids: Tuple[str, ...]
    values: np.ndarray
    _row_index: Dict[str, int] = field(init=False, repr=False)
    _col_index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.row_ids), len(self.col_ids)):
            raise VoaInputError(f"similarity matrix shape {values.shape} does not match its ids")
        values.setflags(write=False)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_ids", tuple(self.col_ids))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_row_index", {row_id: i for i, row_id in enumerate(self.row_ids)})
        object.__setattr__(self, "_col_index", {col_id: j for j, col_id in enumerate(self.col_ids)})

    def entry(self, row_id: str, col_id: str) -> Optional[float]:
        """S[row_id][col_id], or None when either id is not in the matrix."""
        i, j = self._row_index.get(row_id), self._col_index.get(col_id)
        if i is None or j is None:
            return None
        return float(self.values[i, j])

    def column(self, col_id: str) -> np.ndarray:
        return self.values[:, self._col_index[col_id]]

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = [[row_id] + [float(v) for v in self.values[i]] for i, row_id in enumerate(self.row_ids)]
        return voa_utils.write_csv(path, ["id"] + list(self.col_ids), rows)


def similarity_matrix(metric: BaseSimilarity, observations: Sequence[Observation], ids: Optional[Sequence[str]] = None) -> SimilarityMatrix:
    """
    S[i][j] = similarity(o_i, o_j), every entry computed independently.
    """
    ids = tuple(ids) if ids is not None else tuple(str(i) for i in range(len(observations)))
    if len(ids) != len(observations):
        raise VoaInputError("one id per observation is required")
    n = len(observations)
    values = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            values[i, j] = similarity(metric, observations[i], observations[j])
    return SimilarityMatrix(ids, ids, values)


def cross_similarity_matrix(
    metric: BaseSimilarity,
    actual: Sequence[Observation],
    predicted: Sequence[Observation],
    row_ids: Sequence[str],
    col_ids: Sequence[str],
) -> SimilarityMatrix:
    """Recorded observations on the rows, predicted observations on the columns."""
    values = np.empty((len(actual), len(predicted)))
    for i, a in enumerate(actual):
        for j, p in enumerate(predicted):
            values[i, j] = similarity(metric, a, p)
    return SimilarityMatrix(tuple(row_ids), tuple(col_ids), values)
