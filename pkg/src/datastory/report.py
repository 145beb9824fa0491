"""Static report rendering: one PNG per storyboard frame plus a CSV index.

Renders from the abstract chart specs embedded in the storyboard, so a
storyboard file and its table are all that's needed.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .charts import ChartSpec, Mark, SERIES_FIELD, VALUE_FIELD
from .errors import InputError
from .model import ColumnKind, DataTable, rows_matching

DIM_ALPHA = 0.3


def _scoped_rows(spec: ChartSpec, table: DataTable) -> list[dict]:
    idx = sorted(rows_matching(table, spec.data_scope))
    return [dict(table.rows[i]) for i in idx]


def _emphasized(row: dict, spec: ChartSpec) -> bool:
    if not spec.emphasis:
        return True
    return all(row.get(col) in vals for col, vals in spec.emphasis.items())


def _alpha(row: dict, spec: ChartSpec) -> float:
    if spec.skeleton:
        return 0.0
    if not spec.emphasis:
        return 1.0
    return 1.0 if _emphasized(row, spec) else DIM_ALPHA


def _series_colors(spec: ChartSpec) -> dict[str, str]:
    if spec.color is not None and spec.color.column == SERIES_FIELD and spec.color.palette:
        return dict(zip(spec.measures, spec.color.palette))
    if spec.y is not None and spec.y.palette:
        return {m: spec.y.palette[0] for m in spec.measures}
    return {m: f"C{i}" for i, m in enumerate(spec.measures)}


def _category_positions(spec: ChartSpec, rows: list[dict]) -> tuple[list, dict]:
    col = spec.x.column
    if spec.x.domain:
        order = [v for v in spec.x.domain if any(r[col] == v for r in rows)]
    else:
        order = []
        for r in rows:
            if r[col] is not None and r[col] not in order:
                order.append(r[col])
    return order, {v: i for i, v in enumerate(order)}


def render_chart(ax, spec: ChartSpec, table: DataTable) -> None:
    rows = _scoped_rows(spec, table)
    colors = _series_colors(spec)

    if spec.mark is Mark.POINT and spec.x is not None and (
        table.has_column(spec.x.column)
        and table.column(spec.x.column).kind is ColumnKind.QUANTITATIVE
    ):
        xs = [r[spec.x.column] for r in rows]
        ys = [r[spec.y.column] for r in rows]
        alphas = [_alpha(r, spec) for r in rows]
        for x, y, a in zip(xs, ys, alphas):
            if x is None or y is None:
                continue
            ax.scatter([x], [y], alpha=a, color=colors.get(spec.y.column, "C0"))
        ax.set_xlabel(spec.x.column)
        ax.set_ylabel(spec.y.column)
    else:
        if spec.x is None:
            raise InputError("chart without an x encoding cannot be rendered")
        order, pos = _category_positions(spec, rows)
        n_series = max(len(spec.measures), 1)
        grouped = spec.mark is Mark.GROUPED_BAR and n_series > 1
        width = 0.8 / n_series if grouped else 0.8
        bottoms = {v: 0.0 for v in order}
        for si, measure in enumerate(spec.measures):
            xs, ys, alphas = [], [], []
            for r in rows:
                v = r.get(spec.x.column)
                if v not in pos or r.get(measure) is None:
                    continue
                offset = (si - (n_series - 1) / 2) * width if grouped else 0.0
                xs.append(pos[v] + offset)
                ys.append(r[measure])
                alphas.append(_alpha(r, spec))
            color = colors.get(measure, f"C{si}")
            label = measure
            if spec.mark in (Mark.LINE, Mark.MULTI_LINE):
                line_alpha = max(alphas, default=1.0)
                ax.plot(xs, ys, marker="o", color=color, alpha=line_alpha, label=label)
            elif spec.mark is Mark.TICK:
                for x, y, a in zip(xs, ys, alphas):
                    ax.plot([x - 0.3, x + 0.3], [y, y], color=color, alpha=a, label=label)
                    label = None
            elif spec.mark is Mark.STACKED_BAR and n_series > 1:
                for x, y, a in zip(xs, ys, alphas):
                    cat = order[int(round(x))]
                    ax.bar(
                        [x], [y], width, bottom=bottoms[cat], color=color, alpha=a, label=label
                    )
                    bottoms[cat] += y
                    label = None
            else:
                for x, y, a in zip(xs, ys, alphas):
                    ax.bar([x], [y], width, color=color, alpha=a, label=label)
                    label = None
        ax.set_xticks(range(len(order)))
        ax.set_xticklabels([str(v) for v in order], rotation=30, ha="right")
        if len(spec.measures) == 1:
            ax.set_ylabel(spec.measures[0])
        elif spec.measures:
            ax.legend(fontsize=8)
    if spec.y is not None and spec.y.domain:
        ax.set_ylim(spec.y.domain[0], spec.y.domain[1])
    ax.set_title(spec.title, fontsize=10)


def render_frame(frame: dict, table: DataTable, out_path: Path) -> None:
    specs = [ChartSpec.from_json(c["spec"]) for c in frame["charts"]]
    orientation = (frame.get("layout") or {}).get("orientation")
    if len(specs) == 2 and orientation == "horizontal":
        fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    elif len(specs) == 2:
        fig, axes = plt.subplots(2, 1, figsize=(6, 7))
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        axes = [ax]
    for ax, spec in zip(axes, specs):
        render_chart(ax, spec, table)
    fig.suptitle(frame["subtitle"], fontsize=9, wrap=True)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    fig.savefig(out_path, dpi=110)
    plt.close(fig)


def write_report(storyboard: dict, table: DataTable, out_dir: str | Path) -> list[Path]:
    """Render every frame to PNG and write a frames.csv summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    transitions = {t["boundary"]: t["kind"] for t in storyboard["transitions"]}
    csv_path = out / "frames.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "frame",
                "clause_id",
                "start_ms",
                "end_ms",
                "incoming_transition",
                "charts",
                "figure",
                "subtitle",
            ]
        )
        for i, frame in enumerate(storyboard["frames"]):
            png = out / f"frame_{i:03d}.png"
            render_frame(frame, table, png)
            written.append(png)
            writer.writerow(
                [
                    i,
                    frame["clause_id"],
                    frame["start_ms"],
                    frame["end_ms"],
                    transitions.get(i, ""),
                    ";".join(c["id"] for c in frame["charts"]),
                    png.name,
                    frame["subtitle"],
                ]
            )
    written.append(csv_path)
    return written
