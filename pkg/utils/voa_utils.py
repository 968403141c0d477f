import csv
import importlib
import json
import logging
import os
import re
import zlib
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from base.voa_base import ScenarioError, VoaInputError

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("VOA Utils")

SENSOR_ALIASES = {
    "camera": "depth",
    "depth_camera": "depth",
    "planar_lidar": "lidar",
}
METRIC_ALIASES = {
    "tau1": "margin",
    "tau2": "exp_norm",
    "tau3": "gaussian",
    "tau4": "ssim_structure",
    "tau5": "mask_iou",
    "tau6": "moment_shape",
}


def dynamic_import(module_path: str, class_name: str):
    """
    Dynamically import a class from a module.
    Example: dynamic_import("sensor.lidar", "LidarSensor")
    """
    try:
        module = importlib.import_module(module_path)
        clazz = getattr(module, class_name)
        return clazz
    except ModuleNotFoundError as e:
        raise ImportError(f"Module '{module_path}' not found: {e}") from e
    except AttributeError as e:
        raise ImportError(f"Class '{class_name}' not found in '{module_path}': {e}") from e


def to_pascal(name: str) -> str:
    return "".join(p.capitalize() for p in name.replace("-", "_").split("_"))


def resolve_component_names(sensor: Optional[str], metric: Optional[str]) -> Dict[str, str]:
    """
    Map sensor kind and similarity metric names to module/class names.
    Only the names that are given are resolved.
    """
    names: Dict[str, str] = {}
    # Class naming convention: snake_case -> PascalCase + suffix
    if sensor is not None:
        sensor_name = sensor.strip().lower()
        sensor_name = SENSOR_ALIASES.get(sensor_name, sensor_name)
        names.update(
            sensor_name=sensor_name,
            sensor_module=f"sensor.{sensor_name}",
            sensor_class=f"{to_pascal(sensor_name)}Sensor",
        )
    if metric is not None:
        metric_name = metric.strip().lower()
        metric_name = METRIC_ALIASES.get(metric_name, metric_name)
        names.update(
            metric_name=metric_name,
            metric_module=f"similarity.{metric_name}",
            metric_class=f"{to_pascal(metric_name)}Similarity",
        )
    return names


def natural_key(identifier: str) -> Tuple[Any, ...]:
    """
    Sort key that orders embedded integers numerically ("g2" before "g10").
    """
    parts = re.split(r"(\d+)", str(identifier))
    return tuple((0, int(p)) if p.isdigit() else (1, p) for p in parts if p != "")


def named_rng(seed: int, *names: str) -> np.random.Generator:
    """
    Independent generator for a named stream of the scenario seed.
    Streams are keyed by name, so adding a stage never shifts another stage's draws.
    """
    spawn_key = tuple(zlib.crc32(name.encode("utf-8")) for name in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))


def resolve_threads(value: Optional[Union[int, str]] = None) -> int:
    """
    Number of worker threads for per-config evaluation. 0 (or unset) means auto.
    """
    raw = value if value is not None else os.environ.get("VOA_THREADS", "0")
    try:
        threads = int(raw)
    except (TypeError, ValueError):
        logger.warning(f"Ignoring invalid VOA_THREADS value '{raw}'.")
        threads = 0
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def format_float(value: Optional[float]) -> str:
    """
    Shortest round-tripping text for a float; undefined values become 'undefined'.
    """
    if value is None:
        return "undefined"
    return repr(float(value))


def write_json(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        json.dump(payload, file, indent=2, sort_keys=True)
        file.write("\n")
    logger.info(f"Wrote {path}")
    return path


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) or v is None else v for v in row])
    logger.info(f"Wrote {path}")
    return path


def check_keys(raw: Any, field: str, allowed: Iterable[str], required: Iterable[str] = ()) -> Dict[str, Any]:
    """
    Reject anything but a mapping with known keys; report the dotted field path.
    """
    if not isinstance(raw, dict):
        raise ScenarioError(field, "must be an object")
    allowed = set(allowed)
    unknown = sorted(str(k) for k in raw if k not in allowed)
    if unknown:
        raise ScenarioError(f"{field}.{unknown[0]}" if field else unknown[0], "unknown key")
    for key in required:
        if key not in raw:
            raise ScenarioError(f"{field}.{key}" if field else key, "is required")
    return raw


def as_float(raw: Any, field: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ScenarioError(field, f"expected a number, got {raw!r}")
    return float(raw)


def as_vector(raw: Any, size: int, field: str) -> np.ndarray:
    if not isinstance(raw, (list, tuple)) or len(raw) != size:
        raise ScenarioError(field, f"expected a list of {size} numbers")
    return np.array([as_float(v, f"{field}[{i}]") for i, v in enumerate(raw)])


def as_matrix(raw: Any, rows: int, cols: int, field: str) -> np.ndarray:
    if not isinstance(raw, (list, tuple)) or len(raw) != rows:
        raise ScenarioError(field, f"expected a {rows}x{cols} matrix")
    return np.vstack([as_vector(row, cols, f"{field}[{i}]") for i, row in enumerate(raw)])


def read_csv_rows(path: Union[str, Path]) -> List[List[str]]:
    """
    Read a CSV file into stripped string rows, skipping blank lines.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as file:
            return [[cell.strip() for cell in row] for row in csv.reader(file) if any(c.strip() for c in row)]
    except FileNotFoundError:
        raise
    except UnicodeDecodeError as e:
        raise VoaInputError(f"'{path}' is not UTF-8 text: {e}") from e
    except OSError as e:
        raise VoaInputError(f"cannot read '{path}': {e}") from e
