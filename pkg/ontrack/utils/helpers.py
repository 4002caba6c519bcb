"""Helper functions: config files, overrides, hashing and stage timing."""
import hashlib
import json
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Optional, Type, TypeVar

from pydantic import BaseModel

from ontrack.config import Settings, get_settings
from ontrack.core.exceptions import DatasetError
from ontrack.models.configs import TrackerConfig
from ontrack.models.reports import StageTiming

M = TypeVar("M", bound=BaseModel)


def parse_value(raw: str) -> Any:
    """JSON scalar or list when it parses, the bare string otherwise."""
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    """data['a']['b'] = value for key 'a.b'."""
    parts = key.strip().split(".")
    if not all(parts):
        raise DatasetError(f"invalid config key '{key}'")
    node = data
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise DatasetError(f"config key '{key}' conflicts with scalar '{part}'")
        node = child
    node[parts[-1]] = value


def parse_assignment(line: str, origin: str = "override") -> tuple:
    if "=" not in line:
        raise DatasetError(f"{origin}: expected 'key = value', got '{line}'")
    key, raw = line.split("=", 1)
    return key.strip(), parse_value(raw)


def parse_config_text(text: str, origin: str = "config") -> Dict[str, Any]:
    """Parse line-oriented ``key = value`` text with dotted keys and ``#`` comments."""
    data: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = parse_assignment(line, f"{origin}:{number}")
        set_dotted(data, key, value)
    return data


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply ``key=value`` overrides (CLI ``--set``) on top of parsed config data."""
    for item in overrides:
        key, value = parse_assignment(item)
        set_dotted(data, key, value)
    return data


def load_model(
    model_cls: Type[M],
    path: Optional[str] = None,
    overrides: Iterable[str] = (),
    settings: Optional[Settings] = None,
) -> M:
    """Config file, then overrides, then the FCOT_SEED environment override."""
    data: Dict[str, Any] = {}
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise DatasetError(f"cannot read config file {path}: {e}") from e
        data = parse_config_text(text, origin=str(path))
    apply_overrides(data, overrides)
    model = model_cls.model_validate(data)

    seed = (settings or get_settings()).SEED
    if seed is not None and "seed" in model_cls.model_fields:
        if isinstance(model, TrackerConfig):
            model = model.with_seed(seed)
        else:
            model = model.model_copy(update={"seed": seed})
    return model


def load_tracker_config(
    path: Optional[str] = None,
    overrides: Iterable[str] = (),
    settings: Optional[Settings] = None,
) -> TrackerConfig:
    return load_model(TrackerConfig, path, overrides, settings)


def config_hash(model: BaseModel) -> str:
    """SHA-256 of the canonical JSON dump."""
    canonical = json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class StageTimer:
    """Accumulates wall time per named stage."""

    def __init__(self):
        self._stages: Dict[str, StageTiming] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            timing = self._stages.setdefault(name, StageTiming(stage=name))
            timing.calls += 1
            timing.total_s += time.perf_counter() - start

    def report(self) -> list:
        return list(self._stages.values())


@contextmanager
def maybe_stage(timer: Optional[StageTimer], name: str) -> Iterator[None]:
    if timer is None:
        yield
    else:
        with timer.stage(name):
            yield
