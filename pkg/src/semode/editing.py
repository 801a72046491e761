"""Human edits to a trained model: pins, bounds, library restrictions,
fixed composition maps, followed by a refit of the remaining freedom.

Edits are declarative (JSON-serializable) and validated against the current
model before any retraining happens; applying them returns a new model and
leaves the original untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compmap import CompositionMap, fit_composition_map
from .datasets import Dataset
from .difftraj import PropertyRanges
from .errors import DomainError
from .fit import FitSettings, LibraryFilters, fit_semantic_model
from .propmap import SemanticModel
from .semantics import ASYMPTOTE, DIVERGENT, GAMMA

PIN_PROPERTY = "pin_property"
BOUND_PROPERTY = "bound_property"
RESTRICT_LIBRARY = "restrict_library"
FIX_COMPOSITION_MAP = "fix_composition_map"

#: property names a pin or bound may address, per tail kind
_SCALAR_PROPS_COMMON = {"x_start", "d1_start", "t_end"}
_SCALAR_PROPS = {
    ASYMPTOTE: _SCALAR_PROPS_COMMON | {"h", "t_half", "d1_end"},
    DIVERGENT: _SCALAR_PROPS_COMMON | {GAMMA, "d1_end", "d2_end"},
}


@dataclass(frozen=True)
class EditSpec:
    """A list of edits, parsed from the shared JSON schema."""

    edits: tuple

    @staticmethod
    def from_dict(d: dict) -> "EditSpec":
        edits = d.get("edits")
        if not isinstance(edits, list) or not edits:
            raise DomainError("edit spec needs a non-empty 'edits' list")
        for e in edits:
            op = e.get("op")
            if op in (PIN_PROPERTY, BOUND_PROPERTY):
                if "name" not in e:
                    raise DomainError(f"{op} needs a 'name'")
                target = e.get("target", "all")
                if target != "all" and not isinstance(target, int):
                    raise DomainError("edit target must be 'all' or a branch index")
                if op == PIN_PROPERTY and "value" not in e:
                    raise DomainError("pin_property needs a 'value'")
                if op == BOUND_PROPERTY:
                    iv = e.get("interval")
                    if not (isinstance(iv, (list, tuple)) and len(iv) == 2 and iv[0] < iv[1]):
                        raise DomainError("bound_property needs an interval [lo, hi]")
            elif op == RESTRICT_LIBRARY:
                if not isinstance(e.get("filters"), dict):
                    raise DomainError("restrict_library needs a 'filters' object")
            elif op == FIX_COMPOSITION_MAP:
                if not isinstance(e.get("map"), dict):
                    raise DomainError("fix_composition_map needs a 'map' object")
            else:
                raise DomainError(f"unknown edit op {op!r}")
        return EditSpec(tuple(edits))

    def to_dict(self) -> dict:
        return {"edits": [dict(e) for e in self.edits]}


def _applicable(comp, name: str, single_only=("d1_end", "d2_end")) -> bool:
    if name not in _SCALAR_PROPS[comp.tail_motif.kind]:
        return False
    if len(comp) >= 2 and name in single_only:
        return False  # implied by the bounded construction, not a free property
    return True


def _check_pin_domain(model: SemanticModel, dataset: Dataset, comp_map, branch: int, name: str, value: float):
    comp = comp_map.compositions[branch]
    tail = comp.tail_motif
    if name == GAMMA and value <= 0:
        raise DomainError("gamma_star must be pinned to a positive value")
    if name == "h":
        lo, hi = comp_map.branch_interval(branch)
        x0s = [x for x in dataset.x0s if lo <= x <= hi] or [0.5 * (lo + hi)]
        for x0 in x0s:
            x_end = model.predict_semantics(float(x0)).properties.x_end
            if (x_end - value) * (-tail.mon) <= 0:
                side = "below" if tail.mon < 0 else "above"
                raise DomainError(
                    f"pin h={value} rejected: the asymptote must stay {side} the "
                    f"trajectory end value ({x_end:.4g} at x0={x0:.4g})"
                )


def apply_edits(
    model: SemanticModel,
    spec: EditSpec,
    dataset: Dataset,
    settings: FitSettings | None = None,
    warm_start: bool = True,
) -> SemanticModel:
    """Apply edits and refit; returns a new model.

    Pins bypass the raw property path entirely (constant output, zero
    gradient).  Restricting the library re-learns the composition map over
    the filtered library; pins and bounds alone keep the current branch
    structure and only refit the property sub-maps, warm-started from the
    previous weights unless ``warm_start`` is off.
    """
    settings = settings or FitSettings()
    filters = None
    final_map = model.comp_map
    pin_edits, bound_edits = [], []

    for e in spec.edits:
        op = e["op"]
        if op == PIN_PROPERTY:
            pin_edits.append(e)
        elif op == BOUND_PROPERTY:
            bound_edits.append(e)
        elif op == RESTRICT_LIBRARY:
            filters = LibraryFilters.from_dict(e["filters"])
            final_map = None
        elif op == FIX_COMPOSITION_MAP:
            final_map = CompositionMap.from_dict(e["map"])

    if final_map is None:
        library = filters.build()
        if not library:
            raise DomainError("library filters exclude every composition")
        x0s, ts, ys = dataset.x0s, dataset.times_matrix(), dataset.values_matrix()
        ranges = PropertyRanges(float(ts[:, 0].min()), float(ts.max()))
        final_map, _ = fit_composition_map(
            x0s, ts, ys, library, settings.max_branches, ranges, settings.score_config
        )

    regenerated = final_map is not model.comp_map

    def targets(e) -> list:
        t = e.get("target", "all")
        n = len(final_map.compositions)
        if t == "all":
            hits = [b for b in range(n) if _applicable(final_map.compositions[b], e["name"])]
            if not hits:
                raise DomainError(f"no branch accepts property {e['name']!r}")
            return hits
        if regenerated:
            raise DomainError(
                "branch-indexed edits cannot combine with a regenerated composition map; "
                "target 'all' or fix the composition map explicitly"
            )
        if not isinstance(t, int) or not (0 <= t < n):
            raise DomainError(f"branch index {t!r} out of range (0..{n - 1})")
        if not _applicable(final_map.compositions[t], e["name"]):
            raise DomainError(
                f"property {e['name']!r} does not exist for {final_map.compositions[t]}"
            )
        return [t]

    pins: dict = {}
    bounds: dict = {}
    for e in pin_edits:
        for b in targets(e):
            _check_pin_domain(model, dataset, final_map, b, e["name"], float(e["value"]))
            pins.setdefault(str(final_map.compositions[b]), {})[e["name"]] = float(e["value"])
    for e in bound_edits:
        lo, hi = (float(v) for v in e["interval"])
        for b in targets(e):
            bounds.setdefault(str(final_map.compositions[b]), {})[e["name"]] = (lo, hi)

    warm = {}
    if warm_start:
        warm = {key: sm.weights.copy() for key, sm in model.submaps.items()}

    new_settings = FitSettings(
        filters=filters or settings.filters,
        max_branches=settings.max_branches,
        hyper=settings.hyper,
        tuning=settings.tuning,
        score_config=settings.score_config,
        c2_threshold=model.config.c2_threshold,
        fixed_composition_map=final_map,
        pins=pins,
        bounds=bounds,
        warm_weights=warm,
        seed=settings.seed,
    )
    return fit_semantic_model(dataset, new_settings)
