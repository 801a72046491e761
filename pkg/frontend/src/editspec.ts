// Client-side validation of edit specs, mirroring the rules the server
// enforces, so obviously-bad edits never produce a request.

import type { EditOp, EditSpec, ModelPayload } from "./types.js";

const SCALAR_PROPS_H = new Set(["x_start", "d1_start", "t_end", "h", "t_half", "d1_end"]);
const SCALAR_PROPS_U = new Set(["x_start", "d1_start", "t_end", "gamma_star", "d1_end", "d2_end"]);

function tailKind(composition: string): "h" | "u" {
  return composition.trim().endsWith("h") ? "h" : "u";
}

function motifCount(composition: string): number {
  return composition.split(",").length;
}

export function propertiesFor(composition: string): Set<string> {
  const all = tailKind(composition) === "h" ? new Set(SCALAR_PROPS_H) : new Set(SCALAR_PROPS_U);
  if (motifCount(composition) >= 2) {
    all.delete("d1_end");
    all.delete("d2_end");
  }
  return all;
}

export function validateEdit(op: EditOp, model: ModelPayload | null): string[] {
  const errors: string[] = [];
  if (op.op === "pin_property" || op.op === "bound_property") {
    if (!op.name) errors.push("a property name is required");
    if (op.op === "pin_property" && (op.value === undefined || Number.isNaN(op.value))) {
      errors.push("a numeric value is required");
    }
    if (op.op === "bound_property") {
      const iv = op.interval;
      if (!iv || iv.length !== 2 || !(iv[0] < iv[1])) {
        errors.push("the interval must satisfy lo < hi");
      }
    }
    if (op.name === "gamma_star" && op.op === "pin_property" && (op.value ?? 0) <= 0) {
      errors.push("gamma_star must be positive");
    }
    if (model && op.name) {
      const branches = model.model.composition_map.branches;
      const targets =
        op.target === "all" || op.target === undefined
          ? branches.map((_, i) => i)
          : [op.target as number];
      for (const b of targets) {
        if (b < 0 || b >= branches.length) {
          errors.push(`branch ${b} does not exist`);
          continue;
        }
        if (op.target !== "all" && op.target !== undefined) {
          if (!propertiesFor(branches[b].composition).has(op.name)) {
            errors.push(`property ${op.name} does not exist for ${branches[b].composition}`);
          }
        }
      }
      if (
        (op.target === "all" || op.target === undefined) &&
        !branches.some((br) => propertiesFor(br.composition).has(op.name!))
      ) {
        errors.push(`no branch accepts property ${op.name}`);
      }
      // the asymptote must stay on the correct side of the trajectory end
      if (op.op === "pin_property" && op.name === "h" && op.value !== undefined) {
        for (const b of targets) {
          const comp = branches[b]?.composition;
          if (!comp || tailKind(comp) !== "h") continue;
          const curves = model.property_curves.branches[b];
          const xEnd = curves?.properties["x"] as number[][] | undefined;
          if (!xEnd) continue;
          const decreasingTail = comp.trim().split(",").pop()!.startsWith("-");
          for (const row of xEnd) {
            const endVal = row[row.length - 1];
            if (decreasingTail ? op.value >= endVal : op.value <= endVal) {
              errors.push(
                `pin h=${op.value} conflicts with a trajectory end value ${endVal.toFixed(3)}`
              );
              break;
            }
          }
        }
      }
    }
  } else if (op.op === "restrict_library") {
    if (!op.filters || typeof op.filters !== "object") errors.push("filters object required");
  } else if (op.op === "fix_composition_map") {
    if (!op.map || typeof op.map !== "object") errors.push("map object required");
  } else {
    errors.push(`unknown edit op ${(op as { op?: string }).op}`);
  }
  return errors;
}

export function validateSpec(spec: EditSpec, model: ModelPayload | null): string[] {
  if (!spec.edits || spec.edits.length === 0) return ["the edit list is empty"];
  return spec.edits.flatMap((op) => validateEdit(op, model));
}
