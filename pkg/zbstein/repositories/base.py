import logging
import os
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Generic, List, TypeVar

from zbstein.core.errors import InvariantViolation

logger = logging.getLogger(__name__)

T = TypeVar("T")


def atomic_write_text(path: Path, text: str) -> None:
    """Write to a temp file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


class BaseRepository(ABC, Generic[T]):
    """Base repository for file-backed domain objects."""

    suffix: str = ".json"

    def __init__(self, root: Path = Path(".")):
        self.root = Path(root)

    def resolve(self, path: Path) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.root / path

    def load(self, path: Path) -> T:
        """Load and validate one object; parse failures become invariant violations."""
        target = self.resolve(path)
        if not target.exists():
            raise InvariantViolation("input-file", f"{target} does not exist")
        try:
            return self._parse(target)
        except ValueError:
            # Domain errors and pydantic ValidationError keep their own messages
            raise
        except Exception as e:
            logger.error(f"Error reading {target}: {e}")
            raise InvariantViolation("input-file", f"cannot read {target}: {e}") from e

    def list(self, directory: Path) -> List[Path]:
        """Files of this repository's kind in a directory, sorted by name."""
        folder = self.resolve(directory)
        if not folder.is_dir():
            return []
        return sorted(p for p in folder.iterdir() if p.suffix == self.suffix)

    def save(self, path: Path, obj: T) -> Path:
        target = self.resolve(path)
        atomic_write_text(target, self._render(obj))
        logger.info(f"Wrote {target}")
        return target

    @abstractmethod
    def _parse(self, path: Path) -> T:
        """Read one object from path."""

    def _render(self, obj: T) -> str:
        raise NotImplementedError(f"{type(self).__name__} is read-only")
