/** Display decimation: min/max envelope per pixel column.
 *
 * This is the only numeric processing the console performs; everything
 * plotted is agent-supplied.
 */

export type Point = [number, number];

export function minMaxDecimate(points: Point[], maxPoints: number): Point[] {
  if (maxPoints < 2) throw new Error("maxPoints must be >= 2");
  if (points.length <= maxPoints) return points.slice();
  const buckets = Math.floor(maxPoints / 2);
  const perBucket = points.length / buckets;
  const out: Point[] = [];
  for (let b = 0; b < buckets; b++) {
    const lo = Math.floor(b * perBucket);
    const hi = Math.min(Math.floor((b + 1) * perBucket), points.length);
    let min = points[lo];
    let max = points[lo];
    for (let i = lo + 1; i < hi; i++) {
      if (points[i][1] < min[1]) min = points[i];
      if (points[i][1] > max[1]) max = points[i];
    }
    if (min[0] <= max[0]) {
      out.push(min);
      if (max !== min) out.push(max);
    } else {
      out.push(max, min);
    }
  }
  return out;
}
