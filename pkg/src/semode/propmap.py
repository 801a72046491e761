"""Property maps: per-composition univariate models of the initial condition.

Each property is a linear combination of six basis functions of x0
(constant, identity, four clamped cubic B-splines over the training range)
pushed through validity-enforcing transforms, so any weight matrix yields a
legal property set for its composition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .compmap import CompositionMap
from .difftraj import DifferentiableTrajectory, PropertyRanges, RawLayout
from .errors import DomainError, NumericError
from .semantics import Composition, PropertySet, SemanticRep, validate_semantics
from .trajectory import PredictedTrajectory, assemble_c0, assemble_c2

MODEL_FORMAT = "semode-model/1"

N_SPLINE_BASIS = 4


@dataclass(frozen=True)
class BasisSet:
    """Constant + identity + four clamped cubic B-splines on [x_min, x_max].

    With no interior knots the spline part reduces to the Bernstein basis of
    degree 3; inputs are clipped to the range, which extends every basis
    function as a constant outside the training data.
    """

    x_min: float
    x_max: float

    @property
    def size(self) -> int:
        return 2 + N_SPLINE_BASIS

    def design_matrix(self, x0s: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x0s, dtype=float))
        if not np.all(np.isfinite(x)):
            raise NumericError("non-finite x0")
        width = self.x_max - self.x_min or 1.0
        u = np.clip((x - self.x_min) / width, 0.0, 1.0)
        cols = [np.ones_like(x), x]
        for i in range(N_SPLINE_BASIS):
            binom = [1, 3, 3, 1][i]
            cols.append(binom * u**i * (1 - u) ** (3 - i))
        return np.stack(cols, axis=1)


@dataclass
class PropertySubMap:
    """Property model for one composition: weights over the basis plus the
    transform pipeline (with optional pinned values and bounds)."""

    composition: Composition
    basis: BasisSet
    weights: np.ndarray  # [basis, raw] matrix
    ranges: PropertyRanges
    pins: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        layout = RawLayout.for_composition(self.composition)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.basis.size, layout.size):
            raise DomainError(
                f"weights must be {(self.basis.size, layout.size)}, got {self.weights.shape}"
            )

    def pipeline(self) -> DifferentiableTrajectory:
        return DifferentiableTrajectory(self.composition, self.ranges, self.pins, self.bounds)

    def raw(self, x0s) -> np.ndarray:
        return self.basis.design_matrix(x0s) @ self.weights

    def properties(self, x0: float) -> PropertySet:
        return raw_to_properties(
            self.raw([x0])[0], self.composition, self.ranges, self.pins, self.bounds
        )

    def to_dict(self) -> dict:
        return {
            "composition": str(self.composition),
            "basis": {"x_min": self.basis.x_min, "x_max": self.basis.x_max},
            "weights": self.weights.tolist(),
            "pinned": dict(self.pins),
            "bounds": {k: list(v) for k, v in self.bounds.items()},
            "ranges": {"t_start": self.ranges.t_start, "t_max": self.ranges.t_max},
        }

    @staticmethod
    def from_dict(d: dict) -> "PropertySubMap":
        return PropertySubMap(
            Composition.parse(d["composition"]),
            BasisSet(d["basis"]["x_min"], d["basis"]["x_max"]),
            np.asarray(d["weights"], dtype=float),
            PropertyRanges(d["ranges"]["t_start"], d["ranges"]["t_max"]),
            dict(d.get("pinned", {})),
            {k: tuple(v) for k, v in d.get("bounds", {}).items()},
        )


def raw_to_properties_batch(
    raw: np.ndarray,
    c: Composition,
    ranges: PropertyRanges,
    pins: dict | None = None,
    bounds: dict | None = None,
) -> list:
    """Transform a [B, R] matrix of raw vectors into property sets."""
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    if not np.all(np.isfinite(raw)):
        raise NumericError("non-finite raw properties")
    layout = RawLayout.for_composition(c)
    if raw.shape[1] != layout.size:
        raise DomainError(f"raw must have {layout.size} columns, got {raw.shape[1]}")
    dt = DifferentiableTrajectory(c, ranges, pins, bounds)
    with torch.no_grad():
        t_raw = torch.tensor(raw, dtype=torch.float64)
        props = dt.properties(t_raw)
        dt.piece_coefficients(props)
        props["_raw"] = t_raw
        props = dt.tail_properties(props)
    tail_keys = [k for k in ("gamma_star", "h", "t_half") if k in props]
    arrays = {k: props[k].numpy() for k in ("t", "x", "d1_start", "d1_end", "d2_end", *tail_keys)}
    out = []
    for i in range(raw.shape[0]):
        out.append(
            PropertySet(
                arrays["t"][i].copy(),
                arrays["x"][i].copy(),
                float(arrays["d1_start"][i]),
                float(arrays["d1_end"][i]),
                float(arrays["d2_end"][i]),
                {k: float(arrays[k][i]) for k in tail_keys},
            )
        )
    return out


def raw_to_properties(
    raw: np.ndarray,
    c: Composition,
    ranges: PropertyRanges,
    pins: dict | None = None,
    bounds: dict | None = None,
) -> PropertySet:
    """Transform one raw vector into a valid property set for ``c``.

    Total on finite input: the transforms enforce ordering, motif-consistent
    value steps, an in-range start derivative, and tail-domain rules, and
    the end derivatives are read off the fast bounded construction exactly
    as during training.
    """
    raw = np.asarray(raw, dtype=float)
    layout = RawLayout.for_composition(c)
    if raw.shape != (layout.size,):
        raise DomainError(f"raw must have shape {(layout.size,)}, got {raw.shape}")
    return raw_to_properties_batch(raw[None, :], c, ranges, pins, bounds)[0]


@dataclass
class ModelConfig:
    t_start: float
    t_max: float
    c2_threshold: float = 1e-3
    max_motifs: int = 3
    max_branches: int = 3

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_max": self.t_max,
            "c2_threshold": self.c2_threshold,
            "max_motifs": self.max_motifs,
            "max_branches": self.max_branches,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(**d)


@dataclass
class SemanticModel:
    """Composition map plus one property sub-map per branch composition."""

    comp_map: CompositionMap
    submaps: dict
    config: ModelConfig

    def __post_init__(self):
        for comp in self.comp_map.compositions:
            if str(comp) not in self.submaps:
                raise DomainError(f"missing property sub-map for branch composition {comp}")

    def predict_semantics(self, x0: float) -> SemanticRep:
        comp = self.comp_map.predict(x0)
        submap = self.submaps[str(comp)]
        props = submap.properties(x0)
        return SemanticRep(comp, props)

    def predict_trajectory(self, x0: float, mode: str = "infer_c2") -> PredictedTrajectory:
        rep = self.predict_semantics(x0)
        if mode == "train_c0":
            return assemble_c0(rep.composition, rep.properties, check=False)
        if mode == "infer_c2":
            return assemble_c2(rep.composition, rep.properties, threshold=self.config.c2_threshold)
        raise DomainError(f"unknown mode {mode!r}")

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT,
            "composition_map": self.comp_map.to_dict(),
            "submaps": [self.submaps[k].to_dict() for k in sorted(self.submaps)],
            "config": self.config.to_dict(),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @staticmethod
    def from_dict(d: dict) -> "SemanticModel":
        if d.get("version") != MODEL_FORMAT:
            raise DomainError(f"unsupported model format {d.get('version')!r}")
        comp_map = CompositionMap.from_dict(d["composition_map"])
        submaps = {s["composition"]: PropertySubMap.from_dict(s) for s in d["submaps"]}
        return SemanticModel(comp_map, submaps, ModelConfig.from_dict(d["config"]))

    @staticmethod
    def from_json(source) -> "SemanticModel":
        if hasattr(source, "read"):
            d = json.load(source)
        else:
            text = str(source)
            if text.lstrip().startswith("{"):
                d = json.loads(text)
            else:
                with open(text) as fh:
                    d = json.load(fh)
        return SemanticModel.from_dict(d)

    def validate_predictions(self, x0s) -> bool:
        for x0 in np.atleast_1d(x0s):
            rep = self.predict_semantics(float(x0))
            report = validate_semantics(rep.composition, rep.properties)
            if not report.ok:
                raise DomainError(f"invalid prediction at x0={x0}: {report.violations}")
        return True

    def property_curves(self, x0s) -> dict:
        """Sampled property values over a grid of initial conditions, per
        branch, for inspection and plotting (times, values, derivatives,
        tail properties)."""
        x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
        curves = []
        for bi, comp in enumerate(self.comp_map.compositions):
            lo, hi = self.comp_map.branch_interval(bi)
            sel = x0s[(x0s >= lo) & (x0s <= hi)]
            if len(sel) == 0:
                sel = np.array([(lo + hi) / 2.0])
            rows = [self.predict_semantics(float(v)).properties.to_dict() for v in sel]
            keys = sorted(rows[0], key=lambda k: (k in ("t", "x"), k))
            curves.append(
                {
                    "branch": bi,
                    "composition": str(comp),
                    "x0": [float(v) for v in sel],
                    "properties": {k: [r[k] for r in rows] for k in rows[0]},
                }
            )
        return {"branches": curves}
