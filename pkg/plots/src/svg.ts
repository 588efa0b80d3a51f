/**
 * Minimal dependency-free SVG chart builder.
 *
 * Supports linear and log axes, scatter markers with vertical error bars,
 * polylines, and a legend. Output is a standalone SVG document string.
 */

export type AxisKind = "linear" | "log";

export interface Series {
  x: number[];
  y: number[];
  /** one-sigma vertical error bars, optional */
  err?: number[];
  label: string;
  color: string;
  marker?: boolean;
  line?: boolean;
  dashed?: boolean;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  xKind: AxisKind;
  yKind: AxisKind;
  series: Series[];
  notes?: string[];
  width?: number;
  height?: number;
}

interface Scale {
  (v: number): number;
}

function makeScale(kind: AxisKind, lo: number, hi: number, a: number, b: number): Scale {
  if (kind === "log") {
    const llo = Math.log10(lo);
    const lhi = Math.log10(hi);
    return (v) => a + ((Math.log10(v) - llo) / (lhi - llo || 1)) * (b - a);
  }
  return (v) => a + ((v - lo) / (hi - lo || 1)) * (b - a);
}

function ticks(kind: AxisKind, lo: number, hi: number): number[] {
  if (kind === "log") {
    const out: number[] = [];
    for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
      const v = Math.pow(10, e);
      if (v >= lo / 1.0001 && v <= hi * 1.0001) out.push(v);
    }
    if (out.length < 2) out.push(lo, hi);
    return out;
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / 4 || 1)));
  const mult = span / step > 8 ? 2 : 1;
  const out: number[] = [];
  for (let v = Math.ceil(lo / (step * mult)) * step * mult; v <= hi + 1e-12; v += step * mult) {
    out.push(v);
  }
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) return String(Number(v.toPrecision(4)));
  return v.toExponential(1);
}

export function renderChart(spec: ChartSpec): string {
  const W = spec.width ?? 720;
  const H = spec.height ?? 480;
  const m = { left: 72, right: 24, top: 48, bottom: 56 };

  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series.flatMap((s, i) =>
    s.err ? s.y.flatMap((v, j) => [v - s.err![j], v + s.err![j]]) : s.y,
  );
  const pos = (v: number) => Number.isFinite(v) && (spec.yKind !== "log" || v > 0);
  const yOk = ys.filter(pos);
  const xOk = xs.filter((v) => Number.isFinite(v) && (spec.xKind !== "log" || v > 0));
  if (xOk.length === 0 || yOk.length === 0) {
    throw new Error("nothing to draw: no finite positive data for the axes");
  }
  const pad = (lo: number, hi: number, kind: AxisKind): [number, number] => {
    if (kind === "log") return [lo / 1.5, hi * 1.5];
    const d = (hi - lo || Math.abs(hi) || 1) * 0.08;
    return [lo - d, hi + d];
  };
  const [xLo, xHi] = pad(Math.min(...xOk), Math.max(...xOk), spec.xKind);
  const [yLo, yHi] = pad(Math.min(...yOk), Math.max(...yOk), spec.yKind);

  const sx = makeScale(spec.xKind, xLo, xHi, m.left, W - m.right);
  const sy = makeScale(spec.yKind, yLo, yHi, H - m.bottom, m.top);

  const el: string[] = [];
  el.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  // frame
  el.push(
    `<rect x="${m.left}" y="${m.top}" width="${W - m.left - m.right}" ` +
    `height="${H - m.top - m.bottom}" fill="none" stroke="#222"/>`,
  );
  // ticks and grid
  for (const t of ticks(spec.xKind, xLo, xHi)) {
    const x = sx(t);
    el.push(`<line x1="${x}" y1="${H - m.bottom}" x2="${x}" y2="${m.top}" stroke="#ddd"/>`);
    el.push(`<line x1="${x}" y1="${H - m.bottom}" x2="${x}" y2="${H - m.bottom + 5}" stroke="#222"/>`);
    el.push(`<text x="${x}" y="${H - m.bottom + 18}" font-size="11" text-anchor="middle">${fmt(t)}</text>`);
  }
  for (const t of ticks(spec.yKind, yLo, yHi)) {
    const y = sy(t);
    el.push(`<line x1="${m.left}" y1="${y}" x2="${W - m.right}" y2="${y}" stroke="#ddd"/>`);
    el.push(`<line x1="${m.left - 5}" y1="${y}" x2="${m.left}" y2="${y}" stroke="#222"/>`);
    el.push(`<text x="${m.left - 8}" y="${y + 4}" font-size="11" text-anchor="end">${fmt(t)}</text>`);
  }

  for (const s of spec.series) {
    const pts = s.x
      .map((xv, i) => [xv, s.y[i], s.err ? s.err[i] : 0] as const)
      .filter(([xv, yv]) => pos(yv) && Number.isFinite(xv) && (spec.xKind !== "log" || xv > 0));
    if (s.line !== false && pts.length > 1) {
      const d = pts.map(([xv, yv], i) => `${i ? "L" : "M"}${sx(xv).toFixed(2)},${sy(yv).toFixed(2)}`).join(" ");
      el.push(`<path d="${d}" fill="none" stroke="${s.color}" stroke-width="1.5"` +
        (s.dashed ? ` stroke-dasharray="6 4"` : "") + `/>`);
    }
    for (const [xv, yv, ev] of pts) {
      if (s.err && ev > 0) {
        const y1 = spec.yKind === "log" ? Math.max(yv - ev, yLo) : yv - ev;
        el.push(
          `<line x1="${sx(xv)}" y1="${sy(y1)}" x2="${sx(xv)}" y2="${sy(yv + ev)}" ` +
          `stroke="${s.color}" stroke-width="1"/>`,
        );
      }
      if (s.marker !== false) {
        el.push(`<circle cx="${sx(xv)}" cy="${sy(yv)}" r="3" fill="${s.color}"/>`);
      }
    }
  }

  // labels, legend, notes
  el.push(`<text x="${W / 2}" y="22" font-size="15" text-anchor="middle" font-weight="bold">${spec.title}</text>`);
  el.push(`<text x="${W / 2}" y="${H - 14}" font-size="13" text-anchor="middle">${spec.xLabel}</text>`);
  el.push(`<text x="18" y="${H / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 ${H / 2})">${spec.yLabel}</text>`);
  spec.series.forEach((s, i) => {
    const y = m.top + 16 + 16 * i;
    el.push(`<line x1="${W - m.right - 150}" y1="${y - 4}" x2="${W - m.right - 126}" y2="${y - 4}" stroke="${s.color}" stroke-width="2"` + (s.dashed ? ` stroke-dasharray="6 4"` : "") + `/>`);
    el.push(`<text x="${W - m.right - 120}" y="${y}" font-size="11">${s.label}</text>`);
  });
  (spec.notes ?? []).forEach((n, i) => {
    el.push(`<text x="${m.left + 6}" y="${m.top + 14 + 13 * i}" font-size="10" fill="#666">${n}</text>`);
  });

  return `<?xml version="1.0" encoding="UTF-8"?>\n` +
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">\n` +
    el.join("\n") + "\n</svg>\n";
}
