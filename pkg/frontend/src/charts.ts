// Minimal SVG chart geometry. Pure functions compute scales and path data;
// the DOM wrapper at the bottom turns them into elements.

export interface Scale {
  domain: [number, number];
  range: [number, number];
  apply(v: number): number;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 0.5;
    d1 += 0.5;
  }
  const k = (range[1] - range[0]) / (d1 - d0);
  return { domain: [d0, d1], range, apply: (v: number) => range[0] + (v - d0) * k };
}

export function extent(values: number[], pad = 0.05): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (!Number.isFinite(lo)) return [0, 1];
  const span = hi - lo || 1;
  return [lo - pad * span, hi + pad * span];
}

export function linePath(xs: number[], ys: number[], sx: Scale, sy: Scale): string {
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    const cmd = i === 0 ? "M" : "L";
    parts.push(`${cmd}${sx.apply(xs[i]).toFixed(2)},${sy.apply(ys[i]).toFixed(2)}`);
  }
  return parts.join(" ");
}

export interface Series {
  xs: number[];
  ys: number[];
  color: string;
  label?: string;
  dots?: boolean;
  dashed?: boolean;
}

export interface ChartSpec {
  width: number;
  height: number;
  series: Series[];
  title?: string;
  yLabel?: string;
}

const M = { top: 22, right: 10, bottom: 20, left: 44 };

export function chartGeometry(spec: ChartSpec) {
  const xs = spec.series.flatMap((s) => s.xs);
  const ys = spec.series.flatMap((s) => s.ys);
  const sx = linearScale(extent(xs, 0.02), [M.left, spec.width - M.right]);
  const sy = linearScale(extent(ys), [spec.height - M.bottom, M.top]);
  return { sx, sy, paths: spec.series.map((s) => linePath(s.xs, s.ys, sx, sy)) };
}

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderChart(spec: ChartSpec): SVGSVGElement {
  const { sx, sy, paths } = chartGeometry(spec);
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(spec.width));
  svg.setAttribute("height", String(spec.height));
  svg.setAttribute("class", "chart");

  const axis = document.createElementNS(SVG_NS, "path");
  const x0 = sx.range[0];
  const y0 = sy.range[0];
  axis.setAttribute("d", `M${x0},${sy.range[1]} L${x0},${y0} L${sx.range[1]},${y0}`);
  axis.setAttribute("class", "axis");
  svg.appendChild(axis);

  for (const [lo, hi] of [[sy.domain[0], sy.domain[1]]] as [number, number][]) {
    for (const v of [lo, (lo + hi) / 2, hi]) {
      const label = document.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(x0 - 4));
      label.setAttribute("y", String(sy.apply(v) + 3));
      label.setAttribute("class", "tick");
      label.setAttribute("text-anchor", "end");
      label.textContent = formatTick(v);
      svg.appendChild(label);
    }
  }
  for (const v of [sx.domain[0], (sx.domain[0] + sx.domain[1]) / 2, sx.domain[1]]) {
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(sx.apply(v)));
    label.setAttribute("y", String(y0 + 14));
    label.setAttribute("class", "tick");
    label.setAttribute("text-anchor", "middle");
    label.textContent = formatTick(v);
    svg.appendChild(label);
  }

  spec.series.forEach((s, i) => {
    if (s.dots) {
      for (let k = 0; k < s.xs.length; k++) {
        const dot = document.createElementNS(SVG_NS, "circle");
        dot.setAttribute("cx", String(sx.apply(s.xs[k])));
        dot.setAttribute("cy", String(sy.apply(s.ys[k])));
        dot.setAttribute("r", "2.2");
        dot.setAttribute("fill", s.color);
        svg.appendChild(dot);
      }
    } else {
      const path = document.createElementNS(SVG_NS, "path");
      path.setAttribute("d", paths[i]);
      path.setAttribute("fill", "none");
      path.setAttribute("stroke", s.color);
      path.setAttribute("stroke-width", "1.6");
      if (s.dashed) path.setAttribute("stroke-dasharray", "5,4");
      svg.appendChild(path);
    }
  });

  if (spec.title) {
    const t = document.createElementNS(SVG_NS, "text");
    t.setAttribute("x", String(spec.width / 2));
    t.setAttribute("y", "13");
    t.setAttribute("text-anchor", "middle");
    t.setAttribute("class", "chart-title");
    t.textContent = spec.title;
    svg.appendChild(t);
  }
  return svg;
}

export function formatTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 100 || a < 0.01) return v.toExponential(1);
  return v.toPrecision(3).replace(/\.?0+$/, "");
}
