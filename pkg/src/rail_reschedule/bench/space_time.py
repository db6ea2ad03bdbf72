"""
Space/time diagrams of decoded schedules.

Time runs left to right and the nodes of a path top to bottom. Each train
is a polyline through its arrival and departure at every node, so a dwell
shows up as a horizontal segment.
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import svgwrite

from rail_reschedule.constraints import Assignment
from rail_reschedule.model import NodeId, TrainId
from rail_reschedule.utils import format_clock, warn


TRAIN_COLOR = "#1f4e79"
HIGHLIGHT_COLOR = "#c0392b"
GRID_COLOR = "#d0d0d0"
FONT_FAMILY = "Helvetica"


@dataclass(frozen=True)
class DiagramOptions:
    """
    Layout of a space/time diagram.

    Parameters
    ----------
    width : int
        Drawing width in pixels; ignored when ``pixels_per_second`` is set.
    height : int
        Drawing height in pixels.
    margin : int
        Blank border, also holding node labels and clock ticks.
    highlight : frozenset[TrainId]
        Trains drawn in the highlight color, usually the perturbed one.
    time_window : tuple[int, int] | None
        Seconds shown on the time axis; defaults to the span of the drawn
        trains.
    pixels_per_second : float | None
        Fixed horizontal scale. The width then follows from the window.
    tick_seconds : int
        Spacing of the clock ticks.
    title : str | None
        Optional caption.
    """

    width: int = 1200
    height: int = 600
    margin: int = 60
    highlight: frozenset[TrainId] = frozenset()
    time_window: tuple[int, int] | None = None
    pixels_per_second: float | None = None
    tick_seconds: int = 900
    title: str | None = None


def _on_path_runs(
    calls: Sequence[tuple[NodeId, Assignment]],
    rows: Mapping[NodeId, int],
) -> list[list[int]]:
    """Split call positions into runs visiting consecutive rows in one direction."""
    runs: list[list[int]] = []
    current: list[int] = []
    direction = 0
    for position, (node, _) in enumerate(calls):
        if node not in rows:
            if current:
                runs.append(current)
            current, direction = [], 0
            continue
        if current:
            step = rows[node] - rows[calls[current[-1]][0]]
            if step in (1, -1) and direction in (0, step):
                current.append(position)
                direction = step
                continue
            runs.append(current)
            direction = 0
        current = [position]
    if current:
        runs.append(current)
    return runs


def _train_points(
    entries: Mapping[NodeId, Assignment],
    rows: Mapping[NodeId, int],
) -> list[tuple[int, int]] | None:
    """
    Time/row points of one train, or None when it never touches the path.

    A train that joins or leaves the path is clipped to its longest run of
    consecutive on-path calls. The train's terminus contributes its arrival
    only; every other call its arrival and its departure.
    """
    calls = sorted(entries.items(), key=lambda item: (item[1].arrival, item[1].departure))
    runs = _on_path_runs(calls, rows)
    if not runs:
        return None
    longest = max(runs, key=len)
    points = []
    for position in longest:
        node, entry = calls[position]
        points.append((entry.arrival, rows[node]))
        if position < len(calls) - 1:
            points.append((entry.departure, rows[node]))
    return points


def emit_space_time(
    assignments: Mapping[TrainId, Mapping[NodeId, Assignment]],
    node_path: Sequence[NodeId],
    options: DiagramOptions | None = None,
    output: str | Path | None = None,
) -> str:
    """
    Draw a schedule as an SVG space/time diagram.

    Parameters
    ----------
    assignments : Mapping[TrainId, Mapping[NodeId, Assignment]]
        Decoded schedule, e.g. ``ScheduleResult.assignments``.
    node_path : Sequence[NodeId]
        Consecutive nodes shown on the vertical axis, top to bottom.
    options : DiagramOptions | None, optional
        Layout settings.
    output : str | Path | None, optional
        File to write the document to.

    Returns
    -------
    str
        The SVG document. Identical inputs give identical text.

    Raises
    ------
    ValueError
        If the node path is empty or repeats a node.
    """
    options = options or DiagramOptions()
    if not node_path:
        raise ValueError("Node path must not be empty")
    if len(set(node_path)) != len(node_path):
        raise ValueError("Node path must not repeat a node")
    rows = {node: index for index, node in enumerate(node_path)}

    drawn: dict[TrainId, list[tuple[int, int]]] = {}
    for train_id in sorted(assignments):
        points = _train_points(assignments[train_id], rows)
        if points is None:
            warn(f"Train {train_id} never calls on the diagram path; skipped")
            continue
        drawn[train_id] = points

    if options.time_window is not None:
        start, end = options.time_window
    elif drawn:
        times = [t for points in drawn.values() for t, _ in points]
        start, end = min(times), max(times)
    else:
        start, end = 0, 3600
    span = max(1, end - start)

    margin = options.margin
    if options.pixels_per_second is not None:
        scale = options.pixels_per_second
        width = round(2 * margin + span * scale)
    else:
        width = options.width
        scale = (width - 2 * margin) / span
    row_height = (options.height - 2 * margin) / max(1, len(node_path) - 1)

    def x_of(seconds: int) -> float:
        return round(margin + (seconds - start) * scale, 2)

    def y_of(row: int) -> float:
        return round(margin + row * row_height, 2)

    drawing = svgwrite.Drawing(size=(width, options.height), profile="full")
    drawing.add(drawing.rect(insert=(0, 0), size=(width, options.height), fill="white"))
    if options.title:
        drawing.add(
            drawing.text(
                options.title,
                insert=(margin, round(margin / 3, 2)),
                font_family=FONT_FAMILY,
                font_size=14,
            )
        )

    # node rows
    for node, row in rows.items():
        y = y_of(row)
        drawing.add(
            drawing.line((margin, y), (width - margin, y), stroke=GRID_COLOR, stroke_width=1)
        )
        drawing.add(
            drawing.text(
                node,
                insert=(round(margin - 8, 2), y),
                font_family=FONT_FAMILY,
                font_size=11,
                text_anchor="end",
            )
        )

    # clock ticks
    first_tick = -(-start // options.tick_seconds) * options.tick_seconds
    bottom = y_of(len(node_path) - 1)
    for tick in range(first_tick, end + 1, options.tick_seconds):
        x = x_of(tick)
        drawing.add(
            drawing.line((x, bottom), (x, round(bottom + 6, 2)), stroke="black", stroke_width=1)
        )
        drawing.add(
            drawing.text(
                format_clock(tick),
                insert=(x, round(bottom + 20, 2)),
                font_family=FONT_FAMILY,
                font_size=10,
                text_anchor="middle",
            )
        )

    for train_id, points in drawn.items():
        highlighted = train_id in options.highlight
        drawing.add(
            drawing.polyline(
                [(x_of(t), y_of(row)) for t, row in points],
                id=f"train-{train_id}",
                fill="none",
                stroke=HIGHLIGHT_COLOR if highlighted else TRAIN_COLOR,
                stroke_width=3 if highlighted else 1.5,
            )
        )

    document: str = drawing.tostring()
    if output is not None:
        target = Path(output)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(document, encoding="utf-8")
    return document
