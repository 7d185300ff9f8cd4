"""Plain-text summaries of reports for the terminal."""

from __future__ import annotations

from hyperlab.models.report import Report, ResultBlock


def render_block(block: ResultBlock) -> str:
    """One line per block: status, verdicts and the headline numbers."""
    if block.status == "error":
        return f"[error] {block.name}: {block.error}"
    cached = " (cached)" if block.cached else ""
    verdicts = ", ".join(f"{k}={v}" for k, v in block.verdicts.items())
    headline = ", ".join(f"{k}={_short(v)}" for k, v in block.payload.items() if isinstance(v, (int, float, str)))
    parts = [p for p in (verdicts, headline) if p]
    return f"[ok] {block.name}{cached}: " + " | ".join(parts) if parts else f"[ok] {block.name}{cached}"


def render_report(report: Report) -> str:
    """Report summary with one line per block and the overall verdicts."""
    lines = [f"hyperlab {report.kind} run {report.input_hash[:12]} ({report.wall_clock_seconds:.1f}s)"]
    lines += [render_block(block) for block in report.blocks]
    if report.verdicts:
        lines.append("verdicts: " + ", ".join(f"{k}={v}" for k, v in report.verdicts.items()))
    if report.sidecars:
        lines.append(f"sidecars: {len(report.sidecars)} CSV files")
    return "\n".join(lines)


def _short(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
