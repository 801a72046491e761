// DOM rendering: the composition-map strip, the per-branch property panels
// (transition times, transition values, boundary derivatives, tail
// properties), and the trajectory overlay.

import { renderChart, formatTick, Series } from "./charts.js";
import { stripSegments } from "./state.js";
import type { BranchCurves, ModelPayload, PredictPayload } from "./types.js";

const BRANCH_COLORS = ["#3b6fb6", "#b6533b", "#3bb68a", "#8a3bb6", "#b6a23b"];
const PANEL_W = 240;
const PANEL_H = 170;

export function el(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderStrip(
  model: ModelPayload,
  selectedX0: number | null,
  onPick: (x0: number) => void
): HTMLElement {
  const wrap = el("div", { class: "strip-wrap" });
  wrap.appendChild(el("h3", {}, "composition map"));
  const [lo, hi] = model.model.composition_map.x_range;
  const width = 760;
  const svgNS = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", "56");
  svg.setAttribute("class", "strip");
  const toPx = (v: number) => ((v - lo) / (hi - lo || 1)) * (width - 80) + 40;

  stripSegments(model).forEach(([a, b, comp], i) => {
    const rect = document.createElementNS(svgNS, "rect");
    rect.setAttribute("x", String(toPx(a)));
    rect.setAttribute("y", "8");
    rect.setAttribute("width", String(Math.max(toPx(b) - toPx(a), 1)));
    rect.setAttribute("height", "22");
    rect.setAttribute("fill", BRANCH_COLORS[i % BRANCH_COLORS.length]);
    rect.setAttribute("data-branch", String(i));
    svg.appendChild(rect);
    const label = document.createElementNS(svgNS, "text");
    label.setAttribute("x", String((toPx(a) + toPx(b)) / 2));
    label.setAttribute("y", "45");
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "strip-label");
    label.textContent = comp;
    svg.appendChild(label);
  });
  for (const bound of model.branch_boundaries) {
    const tick = document.createElementNS(svgNS, "text");
    tick.setAttribute("x", String(toPx(bound)));
    tick.setAttribute("y", "6");
    tick.setAttribute("text-anchor", "middle");
    tick.setAttribute("class", "tick");
    tick.textContent = formatTick(bound);
    svg.appendChild(tick);
  }
  if (selectedX0 !== null) {
    const marker = document.createElementNS(svgNS, "line");
    marker.setAttribute("x1", String(toPx(selectedX0)));
    marker.setAttribute("x2", String(toPx(selectedX0)));
    marker.setAttribute("y1", "4");
    marker.setAttribute("y2", "34");
    marker.setAttribute("class", "marker");
    svg.appendChild(marker);
  }
  svg.addEventListener("click", (ev) => {
    const rect = (svg as unknown as Element).getBoundingClientRect();
    const frac = (ev.clientX - rect.left - 40) / (width - 80);
    onPick(lo + Math.min(Math.max(frac, 0), 1) * (hi - lo));
  });
  wrap.appendChild(svg as unknown as Node);
  return wrap;
}

function seriesFromMatrix(x0: number[], rows: number[][], color: string): Series[] {
  // rows are per-x0 vectors (e.g. all transition times); one series per column
  const nCols = rows[0]?.length ?? 0;
  const out: Series[] = [];
  for (let col = 0; col < nCols; col++) {
    out.push({ xs: x0, ys: rows.map((r) => r[col]), color });
  }
  return out;
}

export function branchPanels(curves: BranchCurves, color: string): HTMLElement {
  const wrap = el("div", { class: "panels" });
  const props = curves.properties;
  const x0 = curves.x0;

  const panel = (title: string, series: Series[]) => {
    if (!series.length || series.every((s) => s.ys.every((v) => !Number.isFinite(v)))) return;
    const spec = { width: PANEL_W, height: PANEL_H, series, title };
    const card = el("div", { class: "panel-card" });
    card.appendChild(renderChart(spec) as unknown as Node);
    wrap.appendChild(card);
  };

  panel("t-coordinates", seriesFromMatrix(x0, props["t"] as number[][], color));
  panel("x-coordinates", seriesFromMatrix(x0, props["x"] as number[][], color));

  const derivs: Series[] = [];
  for (const name of ["d1_start", "d1_end", "d2_end"]) {
    const ys = props[name] as number[] | undefined;
    if (ys) derivs.push({ xs: x0, ys, color, label: name });
  }
  panel("boundary derivatives", derivs);

  const tail: Series[] = [];
  for (const name of ["h", "t_half", "gamma_star"]) {
    const ys = props[name] as number[] | undefined;
    if (ys) tail.push({ xs: x0, ys, color, label: name });
  }
  panel("tail properties", tail);
  return wrap;
}

export function renderBranches(model: ModelPayload): HTMLElement {
  const wrap = el("div", { class: "branches" });
  model.property_curves.branches.forEach((curves, i) => {
    const section = el("div", { class: "branch-section" });
    section.appendChild(
      el("h4", {}, `branch ${i}: ${curves.composition} (x0 in ${rangeLabel(model, i)})`)
    );
    section.appendChild(branchPanels(curves, BRANCH_COLORS[i % BRANCH_COLORS.length]));
    wrap.appendChild(section);
  });
  return wrap;
}

function rangeLabel(model: ModelPayload, branch: number): string {
  const segs = stripSegments(model);
  const [a, b] = segs[branch];
  return `[${formatTick(a)}, ${formatTick(b)}]`;
}

export function renderTrajectory(
  current: PredictPayload | null,
  previous: PredictPayload | null
): HTMLElement {
  const wrap = el("div", { class: "trajectory" });
  if (!current) {
    wrap.appendChild(el("p", { class: "placeholder" }, "pick an initial condition on the strip"));
    return wrap;
  }
  const series: Series[] = [{ xs: current.t, ys: current.x, color: "#3b6fb6", label: "prediction" }];
  if (previous) {
    series.push({ xs: previous.t, ys: previous.x, color: "#999999", label: "previous", dashed: true });
  }
  if (current.data) {
    series.push({ xs: current.data.t, ys: current.data.y, color: "#b6533b", dots: true });
  }
  wrap.appendChild(
    el("h4", {}, `x0 = ${formatTick(current.x0)} -> ${current.composition} (${current.status})`)
  );
  wrap.appendChild(
    renderChart({ width: 760, height: 260, series, title: "" }) as unknown as Node
  );
  return wrap;
}
