"""Content-addressed result cache in local JSON files."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from hyperlab.models.report import ResultBlock

LOGGER = logging.getLogger(__name__)

FORMAT_VERSION = 2


class ResultCache:
    """One JSON file per (input hash, block name); stale format versions are ignored."""

    def __init__(self, root: Path, enabled: bool = True) -> None:
        self.root = root
        self.enabled = enabled
        if self.enabled:
            self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, input_hash: str, name: str) -> Path:
        return self.root / input_hash[:2] / f"{input_hash}-{name}.json"

    def get(self, input_hash: str, name: str) -> ResultBlock | None:
        """Return a cached block, or None on a miss or a stale entry."""
        if not self.enabled:
            return None
        path = self._path(input_hash, name)
        if not path.exists():
            return None
        raw = json.loads(path.read_text(encoding="utf-8"))
        if raw.get("format_version") != FORMAT_VERSION:
            LOGGER.warning("ignoring cache entry %s with format version %s", path.name, raw.get("format_version"))
            return None
        block = ResultBlock.model_validate(raw["block"])
        block.cached = True
        return block

    def put(self, input_hash: str, block: ResultBlock) -> None:
        """Persist a successful block."""
        if not self.enabled or block.status != "ok":
            return
        path = self._path(input_hash, block.name)
        path.parent.mkdir(parents=True, exist_ok=True)
        stored = block.model_copy(update={"cached": False})
        payload = {"format_version": FORMAT_VERSION, "block": stored.model_dump(mode="json")}
        path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
