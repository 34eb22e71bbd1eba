"""Centroid-to-centroid demand: a single OD matrix and time-sliced profiles."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np


@dataclass
class OdMatrix:
    """Trips between centroids over some period (rows = origins)."""

    centroids: Tuple[str, ...]
    trips: np.ndarray

    def __post_init__(self):
        self.centroids = tuple(self.centroids)
        self.trips = np.asarray(self.trips, dtype=float)
        n = len(self.centroids)
        if self.trips.shape != (n, n):
            raise ValueError(f"OD matrix shape {self.trips.shape} does not match {n} centroids")
        if np.any(self.trips < 0):
            raise ValueError("OD matrix cells must be non-negative")

    def __getitem__(self, od: Tuple[str, str]) -> float:
        o, d = od
        return float(self.trips[self.centroids.index(o), self.centroids.index(d)])

    def pairs(self) -> Iterator[Tuple[str, str, float]]:
        """Non-zero cells in row-major order."""
        for i, o in enumerate(self.centroids):
            for j, d in enumerate(self.centroids):
                if self.trips[i, j] > 0:
                    yield o, d, float(self.trips[i, j])

    def total(self) -> float:
        return float(self.trips.sum())

    def copy(self) -> "OdMatrix":
        return OdMatrix(self.centroids, self.trips.copy())


@dataclass
class DemandProfile:
    """Trip counts per departure interval, ``slices[k]`` covering
    ``[k * interval, (k + 1) * interval)`` of the measured period."""

    centroids: Tuple[str, ...]
    interval: float
    slices: np.ndarray

    def __post_init__(self):
        self.centroids = tuple(self.centroids)
        self.slices = np.asarray(self.slices, dtype=float)
        n = len(self.centroids)
        if self.slices.ndim != 3 or self.slices.shape[1:] != (n, n):
            raise ValueError(f"demand slices must have shape (k, {n}, {n})")
        if np.any(self.slices < 0):
            raise ValueError("demand cells must be non-negative")
        if not self.interval > 0:
            raise ValueError("interval must be > 0")

    @classmethod
    def uniform(cls, matrix: OdMatrix, period: float = 3600.0, interval: float = 900.0) -> "DemandProfile":
        """Spread the trips of ``matrix`` evenly over ``period``."""
        k = int(round(period / interval))
        return cls(matrix.centroids, interval, np.repeat(matrix.trips[None] / k, k, axis=0))

    @property
    def n_intervals(self) -> int:
        return self.slices.shape[0]

    @property
    def duration(self) -> float:
        return self.n_intervals * self.interval

    def slice(self, k: int) -> OdMatrix:
        return OdMatrix(self.centroids, self.slices[k])

    def total_matrix(self) -> OdMatrix:
        return OdMatrix(self.centroids, self.slices.sum(axis=0))

    def total(self) -> float:
        return float(self.slices.sum())

    def scaled(self, factor: float) -> "DemandProfile":
        return DemandProfile(self.centroids, self.interval, self.slices * factor)

    def with_totals(self, matrix: OdMatrix) -> "DemandProfile":
        """Rescale each cell's time profile so it sums to ``matrix``."""
        tot = self.slices.sum(axis=0)
        k = self.n_intervals
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(tot[None] > 0, self.slices / np.where(tot > 0, tot, 1.0)[None], 1.0 / k)
        return DemandProfile(self.centroids, self.interval, share * matrix.trips[None])

    def to_dict(self) -> dict:
        return {"centroids": list(self.centroids), "interval_s": self.interval,
                "slices": self.slices.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "DemandProfile":
        return cls(tuple(doc["centroids"]), float(doc.get("interval_s", 900.0)), np.array(doc["slices"], dtype=float))


def load_demand(path: Union[str, Path]) -> Dict[str, DemandProfile]:
    """Read a demand file. The file holds either one profile or a
    ``{"periods": {name: profile}}`` mapping; a bare profile is returned
    under the key ``"default"``."""
    doc = json.loads(Path(path).read_text())
    if "periods" in doc:
        return {k: DemandProfile.from_dict(v) for k, v in doc["periods"].items()}
    return {"default": DemandProfile.from_dict(doc)}


def save_demand(profiles: Dict[str, DemandProfile], path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps({"periods": {k: v.to_dict() for k, v in profiles.items()}}, indent=1))


def save_od_matrix(matrix: OdMatrix, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps({"centroids": list(matrix.centroids), "trips": matrix.trips.tolist()}, indent=1))
