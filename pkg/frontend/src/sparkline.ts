// Series -> SVG polyline points, viewBox 0 0 width height.

export function sparklinePoints(
  series: number[],
  width = 240,
  height = 40,
): string {
  if (series.length === 0) return "";
  if (series.length === 1) return `0,${height / 2} ${width},${height / 2}`;
  let lo = Math.min(...series);
  let hi = Math.max(...series);
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const dx = width / (series.length - 1);
  return series
    .map((v, i) => {
      const y = height - ((v - lo) / (hi - lo)) * height;
      return `${(i * dx).toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}
