"""Check records and deterministic report rendering.

A report is a list of (name, parameters, residual, tolerance) records
plus free-form info lines.  The text form has one pipe-delimited record
per line, records sorted by name then parameter string, followed by a
summary block; the JSON form mirrors the same data.  Rendering the same
records always produces the same bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class CheckRecord:
    name: str
    params: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual == 0.0 or self.residual < self.tol


def format_params(params: dict) -> str:
    """Canonical one-line rendering of a parameter dict (sorted keys)."""
    return " ".join(f"{k}={params[k]}" for k in sorted(params))


class Report:
    def __init__(self, config_text: str = "", versions: dict | None = None):
        self.records: list[CheckRecord] = []
        self.info_lines: list[str] = []
        self.provenance = {"config_sha256":
                           hashlib.sha256(config_text.encode()).hexdigest()}
        self.provenance.update(versions or {})

    def add(self, name: str, params, residual: float, tol: float) -> None:
        if isinstance(params, dict):
            params = format_params(params)
        self.records.append(CheckRecord(name, params, float(residual),
                                        float(tol)))

    def info(self, line: str) -> None:
        self.info_lines.append(line)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def sorted_records(self) -> list[CheckRecord]:
        return sorted(self.records, key=lambda r: (r.name, r.params))

    def text(self) -> str:
        lines = [f"provenance | {k} = {self.provenance[k]}"
                 for k in sorted(self.provenance)]
        lines += [f"info | {s}" for s in self.info_lines]
        for r in self.sorted_records():
            lines.append(f"check | {r.name} | {r.params} | "
                         f"residual={r.residual:.6e} | tol={r.tol:.1e} | "
                         f"{'PASS' if r.passed else 'FAIL'}")
        n = len(self.records)
        good = sum(r.passed for r in self.records)
        lines.append(f"summary | checks={n} passed={good} failed={n - good} "
                     f"| {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        n = len(self.records)
        good = sum(r.passed for r in self.records)
        return {
            "provenance": dict(self.provenance),
            "info": list(self.info_lines),
            "checks": [{"name": r.name, "params": r.params,
                        "residual": r.residual, "tol": r.tol,
                        "pass": r.passed} for r in self.sorted_records()],
            "summary": {"checks": n, "passed": good, "failed": n - good,
                        "pass": self.passed},
        }

    def write(self, out_path: str | Path, figure: bool = True) -> list[Path]:
        """Write the text report to out_path, the JSON mirror to
        out_path + '.json', and (when any records exist) a residual
        chart to out_path + '.png'.  Returns the paths written."""
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(self.text())
        jpath = Path(str(out) + ".json")
        jpath.write_text(json.dumps(self.as_dict(), indent=2,
                                    sort_keys=True) + "\n")
        written = [out, jpath]
        if figure and self.records:
            fpath = Path(str(out) + ".png")
            render_residual_chart(self, fpath)
            written.append(fpath)
        return written


def render_residual_chart(report: Report, path: str | Path) -> None:
    """Log-scale bar chart of residuals against tolerances, one bar per
    check record, pass green and fail red."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    recs = report.sorted_records()
    floor = 1e-17
    vals = [max(r.residual, floor) for r in recs]
    tols = [r.tol for r in recs]
    colors = ["#2a7e43" if r.passed else "#b03030" for r in recs]
    xs = range(len(recs))
    fig, ax = plt.subplots(figsize=(max(6.0, 0.45 * len(recs) + 2), 4.0))
    ax.bar(xs, vals, color=colors)
    ax.plot(xs, tols, drawstyle="steps-mid", color="#202020", lw=1.0,
            label="tolerance")
    ax.set_yscale("log")
    ax.set_ylabel("max residual")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([r.name for r in recs], rotation=60, ha="right",
                       fontsize=7)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
