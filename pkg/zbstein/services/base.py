import logging
import platform
import time
from abc import ABC, abstractmethod
from datetime import datetime, timezone
from importlib import metadata
from typing import Dict, Generic, Optional, TypeVar

from zbstein import __version__
from zbstein.core.config import override_settings
from zbstein.repositories import ResultsRepository
from zbstein.schemas import ExperimentConfig, RunRecord

logger = logging.getLogger(__name__)

T = TypeVar("T")

_TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "click")


def package_versions() -> Dict[str, str]:
    versions = {"zbstein": __version__, "python": platform.python_version()}
    for name in _TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class BaseCommandService(ABC, Generic[T]):
    """Base class for CLI commands: applies tolerance overrides and records the run."""

    def __init__(self, results: Optional[ResultsRepository] = None):
        self.results = results or ResultsRepository()
        self.record: Optional[RunRecord] = None

    def run(self, config: ExperimentConfig) -> T:
        """Execute the command under the config's tolerance overrides."""
        started = datetime.now(timezone.utc)
        clock = time.perf_counter()
        with override_settings(**config.tolerances.model_dump()):
            result = self.execute(config)
        self.record = RunRecord(
            command=config.command.value,
            config=config.echo(),
            rows=self.row_count(result),
            versions=package_versions(),
            started_at=started.isoformat(),
            wall_clock_seconds=time.perf_counter() - clock,
            **self.record_extras(result),
        )
        logger.info(f"{config.command.value} finished in {self.record.wall_clock_seconds:.3f}s")
        return result

    @abstractmethod
    def execute(self, config: ExperimentConfig) -> T:
        """Command body; override in subclasses."""

    def row_count(self, result: T) -> int:
        return 1

    def record_extras(self, result: T) -> Dict:
        return {}

    def write_record(self, config: ExperimentConfig) -> None:
        """Write the run record sidecar next to --out, if any."""
        if config.out is not None and self.record is not None:
            self.results.write_json(self.results.sidecar_path(config.out), self.record)
