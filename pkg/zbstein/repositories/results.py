import io
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel

from zbstein.repositories.base import BaseRepository, atomic_write_text

logger = logging.getLogger(__name__)


class ResultsRepository(BaseRepository[BaseModel]):
    """Writes CSV grids and JSON reports atomically."""

    def _parse(self, path: Path) -> BaseModel:
        raise NotImplementedError("results are write-only")

    def render_csv(
        self,
        rows: Sequence[BaseModel],
        columns: Optional[List[str]] = None,
        footer: Iterable[str] = (),
    ) -> str:
        frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=columns)
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, lineterminator="\n")
        for line in footer:
            buffer.write(f"# {line}\n")
        return buffer.getvalue()

    def write_csv(
        self,
        path: Path,
        rows: Sequence[BaseModel],
        columns: Optional[List[str]] = None,
        footer: Iterable[str] = (),
    ) -> Path:
        target = self.resolve(path)
        atomic_write_text(target, self.render_csv(rows, columns, footer))
        logger.info(f"Wrote {len(rows)} rows to {target}")
        return target

    def render_json(self, obj: BaseModel) -> str:
        return json.dumps(obj.model_dump(mode="json"), indent=2) + "\n"

    def write_json(self, path: Path, obj: BaseModel) -> Path:
        target = self.resolve(path)
        atomic_write_text(target, self.render_json(obj))
        logger.info(f"Wrote {target}")
        return target

    @staticmethod
    def sidecar_path(path: Path) -> Path:
        """<out>.run.json next to the artifact."""
        path = Path(path)
        return path.with_name(path.name + ".run.json")
