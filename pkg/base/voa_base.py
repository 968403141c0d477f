import abc
from typing import Any, Callable, Dict, List, Optional, Tuple


class VoaError(Exception):
    """Root of every error raised by the VOA toolkit."""

    exit_code = 1


class VoaInputError(VoaError, ValueError):
    """Input that cannot be used as given (files, ids, shapes, parameters)."""

    exit_code = 2


class VoaComputationError(VoaError, RuntimeError):
    """A computation that failed on valid input."""

    exit_code = 1


class ScenarioError(VoaInputError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownStablePoseError(VoaInputError, KeyError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(f"unknown stable pose '{category}'")

    def __str__(self) -> str:
        return str(self.args[0])


class MetricParameterError(VoaInputError):
    def __init__(self, metric: str, param: str, message: str):
        self.metric = metric
        self.param = param
        super().__init__(f"metric '{metric}' parameter '{param}': {message}")


class ObservationMismatchError(VoaInputError):
    pass


class MissingGraspScoreError(VoaInputError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0])


class InconsistentObservationError(VoaComputationError):
    def __init__(self, detail: str = ""):
        message = "observation inconsistent with belief support"
        super().__init__(f"{message} ({detail})" if detail else message)


class StageError(VoaError):
    """
    Failure of one pipeline stage. Keeps the exit code of the wrapped cause
    so input errors surfacing deep inside a run still exit with 2.
    """

    def __init__(self, stage: str, detail: str, cause: Optional[BaseException] = None):
        self.stage = stage
        self.detail = detail
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"stage '{stage}' failed: {detail}")


class BaseSensor(abc.ABC):
    """
    Base class for predicted sensor functions.
    Concrete sensors must implement:
      - parse_config(raw) -> sensor configuration
      - predict(pose, config) -> observation
    """

    kind: str = ""

    def __init__(self, mesh, catalog):
        self.mesh = mesh
        self.catalog = catalog

    @classmethod
    @abc.abstractmethod
    def parse_config(cls, raw: Dict[str, Any], field: str = "sensor.configs"):
        raise NotImplementedError

    @classmethod
    def parse_configs(cls, raw: Any, field: str = "sensor.configs") -> List[Any]:
        if not isinstance(raw, list) or not raw:
            raise ScenarioError(field, "must be a nonempty list")
        configs = [cls.parse_config(entry, f"{field}[{i}]") for i, entry in enumerate(raw)]
        seen = set()
        for i, config in enumerate(configs):
            if config.config_id in seen:
                raise ScenarioError(f"{field}[{i}].id", f"duplicate config id '{config.config_id}'")
            seen.add(config.config_id)
        return configs

    @abc.abstractmethod
    def predict(self, pose, config):
        raise NotImplementedError


class BaseSimilarity(abc.ABC):
    """
    Base class for observation similarity metrics.
    Concrete metrics must implement:
      - score(a, b) -> float in [0, 1], symmetric in (a, b)
    and declare the observation kinds they accept.
    """

    name: str = ""
    supported_kinds: Tuple[str, ...] = ()
    defaults: Dict[str, Any] = {}

    def __init__(self, params: Optional[Dict[str, Any]] = None):
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise VoaInputError(f"metric '{self.name}' got unknown parameters: {', '.join(unknown)}")
        self.params: Dict[str, Any] = {**self.defaults, **params}
        try:
            self.validate()
        except VoaInputError:
            raise
        except (TypeError, ValueError) as e:
            raise VoaInputError(f"metric '{self.name}' got invalid parameters: {e}") from e

    def validate(self) -> None:
        """Check parameter ranges; raise MetricParameterError on invalid values."""

    def param(self, key: str, cast: Callable[[Any], Any] = float) -> Any:
        """Read one parameter through `cast`, naming the parameter when it does not convert."""
        value = self.params[key]
        if isinstance(value, bool) or value is None:
            raise MetricParameterError(self.name, key, f"expected a number, got {value!r}")
        try:
            return cast(value)
        except (TypeError, ValueError) as e:
            raise MetricParameterError(self.name, key, f"expected a number, got {value!r}") from e

    def invalid(self, key: str, message: str) -> MetricParameterError:
        return MetricParameterError(self.name, key, message)

    def describe(self) -> str:
        if not self.params:
            return self.name
        args = ",".join(f"{key}={self.params[key]}" for key in sorted(self.params))
        return f"{self.name}({args})"

    @abc.abstractmethod
    def score(self, a, b) -> float:
        raise NotImplementedError
