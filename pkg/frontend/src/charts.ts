/** Minimal canvas line charts; null values break the line (gap markers). */

import { minMaxDecimate, type Point } from "./decimate.js";

export interface ChartOptions {
  label: string;
  color?: string;
  maxPoints?: number;
  /** draw as a step curve (for ECDFs) */
  step?: boolean;
}

const AXIS = "#5c6773";
const GRID = "#242b33";
const TEXT = "#aab4bf";

export function drawChart(
  canvas: HTMLCanvasElement,
  series: [number, number | null][],
  options: ChartOptions,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.font = "11px system-ui, sans-serif";
  ctx.fillStyle = TEXT;
  ctx.fillText(options.label, 8, 14);

  const points = series.filter((p): p is [number, number] => p[1] !== null);
  if (points.length === 0) {
    ctx.fillText("waiting for data", width / 2 - 40, height / 2);
    return;
  }
  const plotted = minMaxDecimate(points as Point[],
                                 options.maxPoints ?? 300);
  const xs = plotted.map((p) => p[0]);
  const ys = plotted.map((p) => p[1]);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  let yMin = Math.min(...ys);
  let yMax = Math.max(...ys);
  if (yMin === yMax) {
    yMin -= 1;
    yMax += 1;
  }
  const pad = { left: 46, right: 8, top: 22, bottom: 18 };
  const plotW = width - pad.left - pad.right;
  const plotH = height - pad.top - pad.bottom;
  const toX = (x: number) =>
    pad.left + (xMax === xMin ? plotW / 2 : ((x - xMin) / (xMax - xMin)) * plotW);
  const toY = (y: number) => pad.top + (1 - (y - yMin) / (yMax - yMin)) * plotH;

  ctx.strokeStyle = GRID;
  ctx.beginPath();
  for (let i = 0; i <= 4; i++) {
    const y = pad.top + (plotH * i) / 4;
    ctx.moveTo(pad.left, y);
    ctx.lineTo(width - pad.right, y);
  }
  ctx.stroke();
  ctx.fillStyle = TEXT;
  for (let i = 0; i <= 4; i++) {
    const value = yMax - ((yMax - yMin) * i) / 4;
    ctx.fillText(value.toPrecision(3), 4, pad.top + (plotH * i) / 4 + 4);
  }
  ctx.strokeStyle = AXIS;
  ctx.strokeRect(pad.left, pad.top, plotW, plotH);

  // walk the original series so null values split the polyline
  ctx.strokeStyle = options.color ?? "#4cc2ff";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  let pen = false;
  let lastY: number | null = null;
  const drawable = new Set(plotted.map((p) => `${p[0]}:${p[1]}`));
  for (const [x, v] of series) {
    if (v === null) {
      pen = false;
      lastY = null;
      continue;
    }
    if (!drawable.has(`${x}:${v}`)) continue;
    const px = toX(x);
    const py = toY(v);
    if (!pen) {
      ctx.moveTo(px, py);
      pen = true;
    } else if (options.step && lastY !== null) {
      ctx.lineTo(px, lastY);
      ctx.lineTo(px, py);
    } else {
      ctx.lineTo(px, py);
    }
    lastY = py;
  }
  ctx.stroke();
}
