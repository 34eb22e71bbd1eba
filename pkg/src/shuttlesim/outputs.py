"""Delimited-text writers for simulation results.

Every file starts with ``#`` comment lines carrying provenance: a hash of
each input, the seed and the package version. Nothing time-dependent goes
into the header, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Union

from .engine import SimOutput

PathLike = Union[str, Path]


def package_version() -> str:
    from . import __version__
    return __version__


def file_digest(path: PathLike) -> str:
    """SHA-256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def object_digest(obj) -> str:
    """SHA-256 of an object's canonical JSON form (for in-memory inputs)."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def provenance(inputs: Mapping[str, str], seed: Optional[int] = None, **extra) -> List[str]:
    """Header lines: ``inputs`` maps an input name to its digest."""
    lines = [f"# shuttlesim {package_version()}"]
    if seed is not None:
        lines.append(f"# seed: {seed}")
    for name in sorted(inputs):
        lines.append(f"# input {name}: sha256={inputs[name]}")
    for key in sorted(extra):
        lines.append(f"# {key}: {extra[key]}")
    return lines


def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence], meta: Sequence[str] = ()) -> Path:
    """Write ``rows`` as CSV below the comment lines ``meta``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in meta:
        buf.write(line.rstrip("\n") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())
    return path


def read_table(path: PathLike) -> List[dict]:
    """Rows of a file written by :func:`write_table`, as dicts of strings."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.3f}"
    return x


def write_trajectories(output: SimOutput, path: PathLike, meta: Sequence[str] = ()) -> Path:
    return write_table(path, ("t_s", "vehicle_id", "class", "section_id", "offset_m", "speed_mps"),
                       output.trajectories.rows(), meta)


def write_detector_counts(output: SimOutput, path: PathLike, meta: Sequence[str] = ()) -> Path:
    cfg = output.config

    def rows():
        for det in sorted(output.detector_counts):
            for b, c in enumerate(output.detector_counts[det].tolist()):
                yield det, f"{cfg.warmup + b * cfg.detector_interval:.0f}", int(c)

    return write_table(path, ("detector_id", "bin_start_s", "count"), rows(), meta)


def write_traversals(output: SimOutput, path: PathLike, meta: Sequence[str] = ()) -> Path:
    rows = ((tr.vehicle_id, tr.vehicle_class, tr.group, tr.entry, tr.exit, tr.distance, tr.ideal)
            for tr in output.traversals)
    return write_table(path, ("vehicle_id", "class", "group", "entry_s", "exit_s", "distance_m", "ideal_s"),
                       rows, meta)


def write_vehicle_totals(output: SimOutput, path: PathLike, meta: Sequence[str] = ()) -> Path:
    return write_table(path, ("vehicle_id", "class", "travel_time_s", "delay_s"), output.vehicle_totals(), meta)


def write_sim_output(output: SimOutput, directory: PathLike, meta: Sequence[str] = ()) -> List[Path]:
    """All result tables of one replication into ``directory``."""
    d = Path(directory)
    return [
        write_trajectories(output, d / "trajectories.csv", meta),
        write_detector_counts(output, d / "detector_counts.csv", meta),
        write_traversals(output, d / "traversals.csv", meta),
        write_vehicle_totals(output, d / "vehicle_totals.csv", meta),
    ]
