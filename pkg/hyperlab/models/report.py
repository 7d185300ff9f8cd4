"""Report models."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class ResultBlock(BaseModel):
    """One module's result inside a report."""

    name: str
    status: Literal["ok", "error"] = "ok"
    payload: dict[str, Any] = Field(default_factory=dict)
    verdicts: dict[str, str] = Field(default_factory=dict)
    notes: list[str] = Field(default_factory=list)
    error: Optional[str] = None
    cached: bool = False
    tables: dict[str, list[list[Any]]] = Field(default_factory=dict)


class Report(BaseModel):
    """Experiment report: a pure function of (config, seed) apart from timing fields."""

    kind: str
    config: dict[str, Any]
    input_hash: str
    blocks: list[ResultBlock] = Field(default_factory=list)
    verdicts: dict[str, str] = Field(default_factory=dict)
    sidecars: list[str] = Field(default_factory=list)
    wall_clock_seconds: float = 0.0
    versions: dict[str, str] = Field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(block.status == "error" for block in self.blocks)

    def numeric_payload(self) -> dict[str, Any]:
        """Everything that must reproduce bit-for-bit under a fixed config."""
        return {
            "blocks": [{"name": b.name, "status": b.status, "payload": b.payload, "verdicts": b.verdicts} for b in self.blocks],
            "verdicts": self.verdicts,
            "input_hash": self.input_hash,
        }
