"""Report files: ``report.json``, the fixed-width ``report.txt`` table and ``errors.jsonl``."""

import json
from collections.abc import Sequence
from dataclasses import asdict
from pathlib import Path
from typing import Any

import jinja2

from clozecheck.core.types import LabelSeq
from clozecheck.core.types import MetricsReport
from clozecheck.core.types import Sample


def _create_env() -> jinja2.Environment:
    return jinja2.Environment(
        loader=jinja2.PackageLoader("clozecheck.evaluation", "templates"),
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
        autoescape=False,
    )


def render_table(reports: Sequence[MetricsReport], title: str | None = None) -> str:
    """Fixed-width comparison table, one row per system."""
    template = _create_env().get_template("report.txt.j2")
    return template.render(reports=reports, title=title)


def report_to_dict(report: MetricsReport) -> dict[str, Any]:
    return asdict(report)


def write_reports(out_dir: Path, reports: Sequence[MetricsReport], title: str | None = None) -> None:
    """Write ``report.json`` and ``report.txt`` into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"reports": [report_to_dict(r) for r in reports]}
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    (out_dir / "report.txt").write_text(render_table(reports, title))


def read_reports(path: Path) -> list[MetricsReport]:
    data = json.loads(path.read_text())
    return [MetricsReport(**item) for item in data["reports"]]


def error_cases(
    samples: Sequence[Sample],
    mac_labels: Sequence[LabelSeq],
    mac_y: Sequence[int],
    decoded: Sequence[str] | None = None,
    ocr_y: Sequence[int] | None = None,
) -> list[dict[str, Any]]:
    """Samples where MAC or the OCR pipeline disagrees with the gold result.

    Without an OCR run (``ocr_y`` is None) only MAC disagreements are listed
    and ``decoded`` and ``ocr_y`` are written as null.
    """
    n = len(samples)
    texts: Sequence[str | None] = decoded if decoded is not None else [None] * n
    ocr: Sequence[int | None] = ocr_y if ocr_y is not None else [None] * n
    cases = []
    for sample, labels, m_y, text, o_y in zip(
        samples, mac_labels, mac_y, texts, ocr, strict=True
    ):
        if m_y == sample.y and o_y in (None, sample.y):
            continue
        cases.append(
            {
                "id": sample.id,
                "answer": sample.answer,
                "content": sample.content,
                "y": sample.y,
                "gold_labels": sample.labels.to_strings(),
                "mac_labels": labels.to_strings(),
                "mac_y": m_y,
                "decoded": text,
                "ocr_y": o_y,
            }
        )
    return cases


def write_jsonl(path: Path, records: Sequence[dict[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
