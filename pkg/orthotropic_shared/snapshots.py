"""Plain-text field snapshots.

Format: a header line ``n h p eps`` followed by ``n`` lines of ``n``
space-separated values, the south row first. Values are written with 17
significant digits so a write/read cycle reproduces them bitwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from orthotropic_shared.energy import EnergyParams
from orthotropic_shared.errors import ArtifactError, OrthotropicError
from orthotropic_shared.fields import ScalarField
from orthotropic_shared.geometry import Grid

logger = logging.getLogger(__name__)

VALUE_FORMAT = "%.17g"


@dataclass(frozen=True)
class Snapshot:
    field: ScalarField
    params: EnergyParams


def write_snapshot(path: Path, field: ScalarField, params: EnergyParams) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    with path.open("w", encoding="utf-8") as handle:
        handle.write(f"{grid.n} {grid.h!r} {params.p!r} {params.eps!r}\n")
        np.savetxt(handle, field.values, fmt=VALUE_FORMAT, delimiter=" ")
    logger.debug("wrote snapshot %s", path)
    return path


def read_snapshot(path: Path, center: tuple[float, float] = (0.0, 0.0)) -> Snapshot:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"snapshot {path} does not exist")
    try:
        with path.open("r", encoding="utf-8") as handle:
            header = handle.readline().split()
            if len(header) != 4:
                raise ArtifactError(f"snapshot {path}: header must read 'n h p eps'")
            n = int(header[0])
            h, p, eps = (float(token) for token in header[1:])
            values = np.loadtxt(handle, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        if isinstance(exc, OrthotropicError):
            raise
        raise ArtifactError(f"snapshot {path} is malformed: {exc}") from exc
    if values.shape != (n, n):
        raise ArtifactError(f"snapshot {path}: expected {n}x{n} values, found {values.shape}")
    grid = Grid(n=n, side=h * (n - 1), center=center)
    return Snapshot(ScalarField(grid, values), EnergyParams(p, eps))
