"""Internal voxel-grid helpers.

Midpoint voxelization of indicator sets on axis-aligned boxes, with the
one-sided error bookkeeping (surface-adjacent cell count times cell volume)
used by volume, symmetric-difference and flood-fill routines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class VoxelGrid:
    """Occupancy of an indicator function on a uniform cell grid."""

    lo: np.ndarray            # (n,) lower corner of the gridded box
    step: float               # cell edge length (cubical cells)
    shape: tuple[int, ...]    # cells per axis
    occupied: np.ndarray      # bool, shape == self.shape

    @property
    def n(self) -> int:
        return self.lo.size

    @property
    def cell_volume(self) -> float:
        return float(self.step ** self.n)

    def centers(self) -> np.ndarray:
        """All cell centers as an (m, n) array in C order."""
        axes = [self.lo[i] + self.step * (np.arange(self.shape[i]) + 0.5)
                for i in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def volume(self) -> float:
        return float(np.count_nonzero(self.occupied)) * self.cell_volume

    def boundary_mask(self) -> np.ndarray:
        """Cells whose occupancy differs from at least one face neighbor.

        Cells on the grid edge count as boundary-adjacent whenever occupied,
        so the returned bound stays one-sided even if the box is snug.
        """
        occ = self.occupied
        mask = np.zeros_like(occ)
        for axis in range(occ.ndim):
            lead = [slice(None)] * occ.ndim
            trail = [slice(None)] * occ.ndim
            lead[axis] = slice(1, None)
            trail[axis] = slice(None, -1)
            diff = occ[tuple(lead)] != occ[tuple(trail)]
            mask[tuple(lead)] |= diff
            sel_first = [slice(None)] * occ.ndim
            sel_first[axis] = slice(0, 1)
            sel_last = [slice(None)] * occ.ndim
            sel_last[axis] = slice(-1, None)
            mask[tuple(trail)] |= diff
            mask[tuple(sel_first)] |= occ[tuple(sel_first)]
            mask[tuple(sel_last)] |= occ[tuple(sel_last)]
        return mask

    def volume_error_bound(self) -> float:
        return float(np.count_nonzero(self.boundary_mask())) * self.cell_volume

    def component_count(self) -> int:
        """Number of face-connected occupied components (flood fill)."""
        occ = self.occupied
        labels = np.zeros(occ.shape, dtype=np.int32)
        current = 0
        todo: list[tuple[int, ...]] = []
        it = np.argwhere(occ)
        seen = labels
        for seed in it:
            seed_t = tuple(int(v) for v in seed)
            if seen[seed_t]:
                continue
            current += 1
            todo.append(seed_t)
            seen[seed_t] = current
            while todo:
                cell = todo.pop()
                for axis in range(occ.ndim):
                    for delta in (-1, 1):
                        nb = list(cell)
                        nb[axis] += delta
                        if not (0 <= nb[axis] < occ.shape[axis]):
                            continue
                        nb_t = tuple(nb)
                        if occ[nb_t] and not seen[nb_t]:
                            seen[nb_t] = current
                            todo.append(nb_t)
        return current


def grid_over_box(lo: np.ndarray, hi: np.ndarray, resolution: int) -> tuple[np.ndarray, float, tuple[int, ...]]:
    """Cubical-cell grid covering [lo, hi] with `resolution` cells on the longest edge."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    extent = hi - lo
    step = float(extent.max()) / resolution
    if step <= 0.0:
        raise ValueError("degenerate box")
    shape = tuple(max(1, int(np.ceil(e / step - 1e-9))) for e in extent)
    return lo, step, shape


def voxelize(indicator, lo: np.ndarray, hi: np.ndarray, resolution: int) -> VoxelGrid:
    """Midpoint-sample `indicator` on a uniform grid over the box [lo, hi]."""
    lo, step, shape = grid_over_box(lo, hi, resolution)
    axes = [lo[i] + step * (np.arange(shape[i]) + 0.5) for i in range(lo.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    occ = np.asarray(indicator(pts), dtype=bool).reshape(shape)
    return VoxelGrid(lo=lo, step=step, shape=shape, occupied=occ)
