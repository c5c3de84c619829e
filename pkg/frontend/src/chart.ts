/** Minimal canvas line charts for side-by-side series comparison. */

export interface ChartSeries {
  label: string;
  values: number[];
  color: string;
}

export interface Extent {
  min: number;
  max: number;
}

/** Shared y-extent over every series so both panels use one honest axis. */
export function sharedExtent(groups: number[][]): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const values of groups) {
    for (const v of values) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (!isFinite(min)) return { min: 0, max: 1 };
  if (min === max) return { min: min - 0.5, max: max + 0.5 };
  const pad = (max - min) * 0.05;
  return { min: min - pad, max: max + pad };
}

/** Map a value into pixel space (y grows downward on canvas). */
export function toPixelY(value: number, extent: Extent, height: number): number {
  return height - ((value - extent.min) / (extent.max - extent.min)) * height;
}

export function drawChart(
  canvas: HTMLCanvasElement,
  series: ChartSeries[],
  extent: Extent,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  for (const s of series) {
    if (s.values.length < 2) continue;
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    const dx = width / (s.values.length - 1);
    s.values.forEach((v, i) => {
      const x = i * dx;
      const y = toPixelY(v, extent, height);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
}
