"""Input checks shared by the estimator and the public helpers."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .cost_model import DgSpec, Fleet

FLEET_COLUMNS = ("a", "b", "c", "d", "e", "p_max")


def check_fleet_array(X, p_l_max=None, ids=None) -> Fleet:
    """(n_dg, 6) array of full-value [a, b, c, d, e, p_max] rows to a :class:`Fleet`.

    ``p_l_max`` defaults to the total capacity.
    """
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != len(FLEET_COLUMNS):
        raise ValueError(f"expected {len(FLEET_COLUMNS)} columns {FLEET_COLUMNS}, got {X.shape[1]}")
    if ids is None:
        ids = range(1, X.shape[0] + 1)
    ids = list(ids)
    if len(ids) != X.shape[0]:
        raise ValueError(f"{len(ids)} ids for {X.shape[0]} DGs")
    dgs = [DgSpec(int(i), *(float(v) for v in row)) for i, row in zip(ids, X)]
    if p_l_max is None:
        p_l_max = float(X[:, 5].sum())
    return Fleet(dgs, float(p_l_max))


def fleet_to_array(fleet: Fleet) -> np.ndarray:
    return np.array([[getattr(dg, k) for k in FLEET_COLUMNS] for dg in fleet.dgs])


def check_loads(loads, p_l_max: float) -> np.ndarray:
    """1-D float array of loads inside [0, p_l_max]; a column vector is flattened."""
    arr = np.asarray(loads, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise ValueError(f"loads must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("loads must be finite")
    if np.any(arr < 0) or np.any(arr > p_l_max * (1 + 1e-12)):
        raise ValueError(f"loads must lie in [0, {p_l_max}]")
    return arr
