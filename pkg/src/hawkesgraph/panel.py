"""Aligned mixed-type series for one subject.

A panel bundles the binary/score node series ``y`` (responses), continuous
exogenous series ``x``, static covariates ``z`` and per-(series, t) validity
masks. All series share one time axis of length T; invalid entries are never
read downstream (the design builder drops any row whose lag window touches
them).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PatientPanel:
    patient_id: str
    y: np.ndarray                      # (n_y, T) scores in [0, 1] or binary
    x: np.ndarray                      # (n_x, T) continuous
    z: np.ndarray                      # (n_z,) static
    y_names: tuple[str, ...]
    x_names: tuple[str, ...]
    z_names: tuple[str, ...]
    y_mask: np.ndarray = field(default=None)   # (n_y, T) bool, True = valid
    x_mask: np.ndarray = field(default=None)   # (n_x, T) bool

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        x = np.asarray(self.x, dtype=float)
        if x.size == 0 or len(self.x_names) == 0:
            x = np.zeros((0, y.shape[1]))
        else:
            x = x.reshape(len(self.x_names), -1)
        z = np.asarray(self.z, dtype=float).reshape(-1)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        if self.y_mask is None:
            object.__setattr__(self, "y_mask", np.ones(y.shape, dtype=bool))
        if self.x_mask is None:
            object.__setattr__(self, "x_mask", np.ones(x.shape, dtype=bool))
        object.__setattr__(self, "y_mask", np.asarray(self.y_mask, dtype=bool))
        object.__setattr__(self, "x_mask",
                           np.asarray(self.x_mask, dtype=bool).reshape(x.shape))
        if y.shape[1] != x.shape[1] and x.shape[0] > 0:
            raise ValueError("y and x must share the time axis")
        if y.shape != self.y_mask.shape:
            raise ValueError("y_mask shape mismatch")

    @property
    def T(self) -> int:
        return self.y.shape[1]

    @property
    def n_y(self) -> int:
        return self.y.shape[0]

    @property
    def n_x(self) -> int:
        return self.x.shape[0]

    @property
    def n_z(self) -> int:
        return self.z.shape[0]

    def binary_y(self) -> np.ndarray:
        """Responses binarized by the indicator 1{y > 0}."""
        return (self.y > 0).astype(float)


def save_panels(path, panels: list[PatientPanel]) -> None:
    """Write a panel archive (single .npz, arrays keyed per patient)."""
    if not panels:
        raise ValueError("no panels to save")
    head = panels[0]
    header = {
        "n_patients": len(panels),
        "patient_ids": [p.patient_id for p in panels],
        "y_names": list(head.y_names),
        "x_names": list(head.x_names),
        "z_names": list(head.z_names),
    }
    arrays: dict[str, np.ndarray] = {
        "header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    }
    for i, p in enumerate(panels):
        if p.y_names != head.y_names or p.x_names != head.x_names:
            raise ValueError("panels in one archive must share series names")
        arrays[f"y_{i}"] = p.y
        arrays[f"x_{i}"] = p.x
        arrays[f"z_{i}"] = p.z
        arrays[f"ym_{i}"] = p.y_mask
        arrays[f"xm_{i}"] = p.x_mask
    np.savez_compressed(path, **arrays)


def load_panels(path) -> list[PatientPanel]:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        panels = []
        for i in range(header["n_patients"]):
            panels.append(PatientPanel(
                patient_id=header["patient_ids"][i],
                y=data[f"y_{i}"], x=data[f"x_{i}"], z=data[f"z_{i}"],
                y_names=tuple(header["y_names"]),
                x_names=tuple(header["x_names"]),
                z_names=tuple(header["z_names"]),
                y_mask=data[f"ym_{i}"], x_mask=data[f"xm_{i}"],
            ))
    return panels
