"""Per-epoch metric records, logged and appended to a JSON-lines file."""

import json
import logging
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any


logger = logging.getLogger(__name__)


@dataclass
class MetricsLog:
    """Epoch records kept in memory and, when ``path`` is set, on disk.

    The file is truncated on creation so a rerun does not mix histories.
    """

    path: Path | None = None
    records: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def append(self, record: dict[str, Any]) -> None:
        self.records.append(record)
        logger.info(
            "epoch %s: %s",
            record.get("epoch"),
            ", ".join(f"{k}={v:.4f}" for k, v in record.items() if isinstance(v, float)),
        )
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(record, sort_keys=True) + "\n")

    def column(self, key: str) -> list[Any]:
        return [r[key] for r in self.records if key in r]
