"""End-to-end model fitting: composition map first, then one property
sub-map per branch composition."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .compmap import CompositionMap, FitConfig, fit_composition_map
from .datasets import Dataset
from .difftraj import PropertyRanges
from .errors import DomainError
from .propmap import ModelConfig, SemanticModel
from .semantics import Motif, enumerate_compositions
from .training import SubmapHyperparams, TuningConfig, fit_property_submap, tune_property_submap


@dataclass(frozen=True)
class LibraryFilters:
    max_motifs: int = 3
    last_motif: str | None = None
    first_motif: str | None = None
    forbidden: tuple = ()

    def build(self) -> list:
        return enumerate_compositions(
            self.max_motifs,
            last_motif=Motif.parse(self.last_motif) if self.last_motif else None,
            first_motif=Motif.parse(self.first_motif) if self.first_motif else None,
            forbidden=tuple(Motif.parse(m) for m in self.forbidden),
        )

    def to_dict(self) -> dict:
        return {
            "max_motifs": self.max_motifs,
            "last_motif": self.last_motif,
            "first_motif": self.first_motif,
            "forbidden": list(self.forbidden),
        }

    @staticmethod
    def from_dict(d: dict) -> "LibraryFilters":
        return LibraryFilters(
            int(d.get("max_motifs", 3)),
            d.get("last_motif"),
            d.get("first_motif"),
            tuple(d.get("forbidden", ())),
        )


def _regression_init(table, comp, branch_x0s: np.ndarray) -> tuple:
    """Weights that reproduce the per-sample scoring solutions: a ridge
    regression of the fitted raw properties onto the basis columns gives the
    sub-map a start that already tracks each sample's individual fit."""
    from .propmap import BasisSet

    key = str(comp)
    if key not in table.solutions:
        return ()
    sel = np.isin(table.x0s, branch_x0s)
    if sel.sum() < 2:
        return ()
    basis = BasisSet(float(branch_x0s.min()), float(branch_x0s.max()))
    B = basis.design_matrix(table.x0s[sel])
    raws = table.solutions[key][sel]
    lam = 1e-8 * np.eye(B.shape[1])
    W = np.linalg.solve(B.T @ B + lam, B.T @ raws)
    return (W,)


@dataclass
class FitSettings:
    filters: LibraryFilters = field(default_factory=LibraryFilters)
    max_branches: int = 3
    hyper: SubmapHyperparams = field(default_factory=SubmapHyperparams)
    tuning: TuningConfig | None = None
    score_config: FitConfig = field(default_factory=FitConfig)
    c2_threshold: float = 1e-3
    fixed_composition_map: CompositionMap | None = None
    pins: dict = field(default_factory=dict)    # composition string -> {name: value}
    bounds: dict = field(default_factory=dict)  # composition string -> {name: (lo, hi)}
    warm_weights: dict = field(default_factory=dict)  # composition string -> W
    seed: int = 0


def fit_semantic_model(dataset: Dataset, settings: FitSettings = FitSettings()) -> SemanticModel:
    """Train a full model on a dataset.

    The composition map is learned by scoring the filtered library against
    every sample (unless a fixed map is supplied); the dataset then splits
    by predicted composition and each subset trains its own property
    sub-map, tuned when a tuning config is present.
    """
    if len(dataset) < 2:
        raise DomainError("need at least two samples")
    x0s = dataset.x0s
    ts = dataset.times_matrix()
    ys = dataset.values_matrix()
    ranges = PropertyRanges(float(ts[:, 0].min()), float(ts.max()))

    table = None
    if settings.fixed_composition_map is not None:
        comp_map = settings.fixed_composition_map
    else:
        library = settings.filters.build()
        if not library:
            raise DomainError("library filters exclude every composition")
        comp_map, table = fit_composition_map(
            x0s, ts, ys, library, settings.max_branches, ranges, settings.score_config
        )

    submaps = {}
    for comp in dict.fromkeys(comp_map.compositions):  # unique, ordered
        key = str(comp)
        mask = np.array([comp_map.predict(float(v)) == comp for v in x0s])
        if mask.sum() < 2:
            raise DomainError(f"branch composition {key} got {int(mask.sum())} samples")
        pins = settings.pins.get(key, {})
        bounds = settings.bounds.get(key, {})
        w_init = settings.warm_weights.get(key)
        extra = _regression_init(table, comp, x0s[mask]) if table is not None else ()
        hyper = replace(settings.hyper, seed=settings.seed)
        if settings.tuning is not None:
            tuning = replace(settings.tuning, seed=settings.seed + 1000 * len(submaps))
            submap, _, _ = tune_property_submap(
                x0s[mask], ts[mask], ys[mask], comp, ranges,
                tuning=tuning, hyper=hyper, pins=pins, bounds=bounds,
                w_init=w_init, extra_inits=extra,
            )
        else:
            submap, _ = fit_property_submap(
                x0s[mask], ts[mask], ys[mask], comp, ranges,
                hyper=hyper, pins=pins, bounds=bounds,
                w_init=w_init, extra_inits=extra,
            )
        submaps[key] = submap

    config = ModelConfig(
        ranges.t_start,
        ranges.t_max,
        settings.c2_threshold,
        settings.filters.max_motifs,
        settings.max_branches,
    )
    return SemanticModel(comp_map, submaps, config)
