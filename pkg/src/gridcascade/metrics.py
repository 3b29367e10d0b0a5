"""Cascade outcome metrics and tabular report emission.

Operability O is the mean of state/2 over every non-cable entity; the
resilience gap is G = 1 - O. "Affected" is judged against the pre-disturbance
baseline (everything fully operational), so directly clamped entities count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .miim import DEGRADED, FAILED, OPERATIONAL, CascadeTrace
from .topology import Entity


class MetricsError(ValueError):
    pass


def operability(final_states: dict[str, int], n: int | None = None) -> float:
    """Mean normalized operability over n entities (defaults to all present)."""
    if n is None:
        n = len(final_states)
    if n == 0:
        raise MetricsError("operability is undefined for zero entities")
    return sum(final_states.values()) / (2.0 * n)


def resilience_gap(o: float) -> float:
    if not 0.0 <= o <= 1.0:
        raise MetricsError(f"operability must lie in [0, 1], got {o}")
    return 1.0 - o


def total_affected(trace: CascadeTrace) -> int:
    """Entities whose final state departs from the all-operational baseline."""
    return sum(1 for state in trace.final.values() if state != OPERATIONAL)


def affected_failed_only(trace: CascadeTrace) -> int:
    return sum(1 for state in trace.final.values() if state == FAILED)


def decompose_direct_vs_cascade(trace: CascadeTrace) -> tuple[int, int]:
    """(directly clamped at T0, additionally affected through propagation)."""
    direct = sum(1 for state in trace.rounds[0].values() if state == FAILED)
    return direct, total_affected(trace) - direct


def breakdown_by_kind(final_states: dict[str, int], entities: list[Entity]) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for e in entities:
        bucket = out.setdefault(e.kind.value, {"failed": 0, "degraded": 0, "operational": 0})
        state = final_states[e.entity_id]
        if state == FAILED:
            bucket["failed"] += 1
        elif state == DEGRADED:
            bucket["degraded"] += 1
        else:
            bucket["operational"] += 1
    return out


@dataclass
class ResilienceReport:
    scenario: str
    initial_failed: int
    cascade_depth: int
    operability: float
    resilience_gap: float
    total_affected: int
    affected_failed_only: int
    breakdown: dict[str, dict]
    initial_by_kind: dict[str, int]
    direct: int
    propagated: int


def build_report(scenario_name: str, trace: CascadeTrace, entities: list[Entity]) -> ResilienceReport:
    o = operability(trace.final)
    direct, propagated = decompose_direct_vs_cascade(trace)
    initial = breakdown_by_kind(trace.rounds[0], entities)
    return ResilienceReport(
        scenario=scenario_name,
        initial_failed=direct,
        cascade_depth=trace.depth,
        operability=o,
        resilience_gap=resilience_gap(o),
        total_affected=total_affected(trace),
        affected_failed_only=affected_failed_only(trace),
        breakdown=breakdown_by_kind(trace.final, entities),
        initial_by_kind={kind: counts["failed"] for kind, counts in initial.items()},
        direct=direct,
        propagated=propagated,
    )


def reports_to_json(reports: list[ResilienceReport]) -> str:
    payload = [
        {
            "scenario": r.scenario,
            "initial_failed": r.initial_failed,
            "cascade_depth": r.cascade_depth,
            "operability": r.operability,
            "resilience_gap": r.resilience_gap,
            "total_affected": r.total_affected,
            "affected_failed_only": r.affected_failed_only,
            "breakdown": r.breakdown,
            "initial_by_kind": r.initial_by_kind,
            "direct": r.direct,
            "propagated": r.propagated,
        }
        for r in sorted(reports, key=lambda r: r.scenario)
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def reports_to_csv(reports: list[ResilienceReport]) -> str:
    lines = [
        "scenario,initial_failed,cascade_depth,operability,resilience_gap,"
        "total_affected,affected_failed_only,direct,propagated"
    ]
    for r in sorted(reports, key=lambda r: r.scenario):
        lines.append(
            f"{_csv_quote(r.scenario)},{r.initial_failed},{r.cascade_depth},"
            f"{r.operability:.4f},{r.resilience_gap:.4f},{r.total_affected},"
            f"{r.affected_failed_only},{r.direct},{r.propagated}"
        )
    return "\n".join(lines) + "\n"


def format_report_table(reports: list[ResilienceReport]) -> str:
    header = (
        f"{'Scenario':<40}{'Initially Failed':>18}{'Cascade Depth':>15}"
        f"{'Operability (O)':>17}{'Gap (G)':>10}{'Total Affected':>16}"
    )
    lines = [header, "-" * len(header)]
    for r in sorted(reports, key=lambda r: r.scenario):
        lines.append(
            f"{r.scenario:<40}{r.initial_failed:>18}{r.cascade_depth:>15}"
            f"{r.operability:>17.4f}{r.resilience_gap:>10.4f}{r.total_affected:>16}"
        )
    return "\n".join(lines) + "\n"


def emit_report(reports: list[ResilienceReport], out_dir: str | Path,
                formats: tuple[str, ...] = ("json", "csv", "txt", "svg")) -> list[Path]:
    """Write the report in each requested format; byte-stable for fixed inputs."""
    if not reports:
        raise MetricsError("no reports to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def _write(name: str, text: str) -> None:
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    ordered = sorted(reports, key=lambda r: r.scenario)
    if "json" in formats:
        _write("resilience_report.json", reports_to_json(ordered))
    if "csv" in formats:
        _write("resilience_report.csv", reports_to_csv(ordered))
    if "txt" in formats:
        _write("resilience_report.txt", format_report_table(ordered))
    if "svg" in formats:
        names = [_short_name(r.scenario) for r in ordered]
        kinds = sorted({k for r in ordered for k in r.breakdown})
        _write(
            "initial_failures_by_kind.svg",
            grouped_bar_svg(
                "Initial failure breakdown by entity kind (T0)",
                names,
                {k: [r.initial_by_kind.get(k, 0) for r in ordered] for k in kinds},
            ),
        )
        _write(
            "operability_by_scenario.svg",
            grouped_bar_svg(
                "Post-cascade operability and resilience gap",
                names,
                {
                    "operability": [round(r.operability, 4) for r in ordered],
                    "resilience_gap": [round(r.resilience_gap, 4) for r in ordered],
                },
            ),
        )
        _write(
            "direct_vs_cascade.svg",
            grouped_bar_svg(
                "Direct vs cascade-propagated affected entities",
                names,
                {
                    "direct": [r.direct for r in ordered],
                    "propagated": [r.propagated for r in ordered],
                },
            ),
        )
        _write(
            "failed_by_kind.svg",
            grouped_bar_svg(
                "Post-cascade failed entities by kind",
                names,
                {kind: [r.breakdown.get(kind, {}).get("failed", 0) for r in ordered]
                 for kind in kinds},
            ),
        )
    return written


def _short_name(name: str) -> str:
    return name.split(":", 1)[0].strip() if ":" in name else name


_PALETTE = ("#4878a8", "#d1605e", "#6aa56e", "#e8b049", "#8a6fae", "#777777")


def grouped_bar_svg(title: str, categories: list[str], series: dict[str, list[float]],
                    note: str = "") -> str:
    """Minimal deterministic grouped bar chart; no plotting library involved."""
    width, height = 640, 360
    margin_left, margin_bottom, margin_top = 60, 60, 40
    plot_w = width - margin_left - 20
    plot_h = height - margin_top - margin_bottom
    labels = list(series)
    peak = max((max(vals) for vals in series.values() if vals), default=0) or 1
    group_w = plot_w / max(len(categories), 1)
    bar_w = group_w / (len(labels) + 1)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif">{_xml(title)}</text>',
    ]
    for i, category in enumerate(categories):
        for j, label in enumerate(labels):
            value = series[label][i]
            bar_h = plot_h * value / peak
            x = margin_left + i * group_w + (j + 0.5) * bar_w
            y = margin_top + plot_h - bar_h
            color = _PALETTE[j % len(_PALETTE)]
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{bar_h:.2f}" '
                f'fill="{color}"><title>{_xml(label)}: {value}</title></rect>'
            )
        parts.append(
            f'<text x="{margin_left + (i + 0.5) * group_w:.1f}" y="{height - margin_bottom + 16}" '
            f'text-anchor="middle" font-size="11" font-family="sans-serif">{_xml(category)}</text>'
        )
    for j, label in enumerate(labels):
        color = _PALETTE[j % len(_PALETTE)]
        x = margin_left + j * 130
        y = height - 18
        parts.append(f'<rect x="{x}" y="{y - 10}" width="10" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{x + 14}" y="{y}" font-size="11" font-family="sans-serif">{_xml(label)}</text>'
        )
    parts.append(
        f'<text x="12" y="{margin_top - 8}" font-size="11" font-family="sans-serif">max {peak}</text>'
    )
    if note:
        parts.append(
            f'<text x="{width - 20}" y="{margin_top - 8}" text-anchor="end" font-size="10" '
            f'font-family="sans-serif">{_xml(note)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _xml(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _csv_quote(text: str) -> str:
    if "," in text or '"' in text:
        return '"' + text.replace('"', '""') + '"'
    return text
