/** Inline SVG sparkline for an indicator's history. Coordinates are layout,
 * not displayed figures; shown values always come verbatim from the server. */

import type { HistoryPointDto } from "./types.js";

export function sparkline(history: HistoryPointDto[], w = 110, h = 22): string {
  const observed = history.filter((p) => p.value !== null);
  if (observed.length < 2) return "";
  const values = observed.map((p) => p.value as number);
  const min = Math.min(...values);
  const max = Math.max(...values);
  const range = max - min || 1;
  const span = Math.max(history.length - 1, 1);
  const points = observed
    .map((p) => {
      const x = (history.indexOf(p) / span) * w;
      const y = h - (((p.value as number) - min) / range) * (h - 4) - 2;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  const markers = observed
    .filter((p) => p.abnormal)
    .map((p) => {
      const x = (history.indexOf(p) / span) * w;
      const y = h - (((p.value as number) - min) / range) * (h - 4) - 2;
      return `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="1.6" class="spark-abnormal"/>`;
    })
    .join("");
  return (
    `<svg width="${w}" height="${h}" viewBox="0 0 ${w} ${h}" class="sparkline" role="img">` +
    `<polyline points="${points}" fill="none" stroke="currentColor" stroke-width="1.2"/>` +
    markers +
    `</svg>`
  );
}
