// Software polyline rasterizer. Canvas export goes through this pure
// function rather than the browser's 2D context, so the same stroke list
// always flattens to byte-identical pixels regardless of platform,
// anti-aliasing, or GPU. Display painting may use the native canvas; the
// uploaded raster never does.

export interface GrayRaster {
  width: number;
  height: number;
  // Row-major, one byte per pixel: 0 is ink, 255 is paper.
  pixels: Uint8Array;
}

export interface StrokePoint {
  x: number;
  y: number;
}

export interface Stroke {
  points: StrokePoint[];
  width: number;
  erase: boolean;
}

export function makeRaster(width: number, height: number, fill = 255): GrayRaster {
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new Error(`bad raster size ${width}x${height}`);
  }
  return { width, height, pixels: new Uint8Array(width * height).fill(fill) };
}

export function cloneRaster(r: GrayRaster): GrayRaster {
  return { width: r.width, height: r.height, pixels: new Uint8Array(r.pixels) };
}

export function rastersEqual(a: GrayRaster, b: GrayRaster): boolean {
  if (a.width !== b.width || a.height !== b.height) return false;
  const pa = a.pixels;
  const pb = b.pixels;
  for (let i = 0; i < pa.length; i++) {
    if (pa[i] !== pb[i]) return false;
  }
  return true;
}

// Squared distance from point p to segment ab. Plain double arithmetic and
// Math.sqrt only; Math.hypot has implementation-defined accuracy and would
// break cross-engine byte identity.
function segmentDistanceSq(
  px: number, py: number,
  ax: number, ay: number,
  bx: number, by: number,
): number {
  const abx = bx - ax;
  const aby = by - ay;
  const apx = px - ax;
  const apy = py - ay;
  const len = abx * abx + aby * aby;
  if (len === 0) {
    return apx * apx + apy * apy;
  }
  let t = (apx * abx + apy * aby) / len;
  if (t < 0) t = 0;
  else if (t > 1) t = 1;
  const dx = px - (ax + t * abx);
  const dy = py - (ay + t * aby);
  return dx * dx + dy * dy;
}

function stampStroke(
  target: Uint8Array,
  background: Uint8Array,
  width: number,
  height: number,
  stroke: Stroke,
): void {
  const pts = stroke.points;
  if (pts.length === 0) return;
  const radius = Math.max(0.5, stroke.width / 2);
  const r2 = radius * radius;
  const segments = pts.length === 1 ? 1 : pts.length - 1;
  for (let s = 0; s < segments; s++) {
    const a = pts[s]!;
    const b = pts[Math.min(s + 1, pts.length - 1)]!;
    const x0 = Math.max(0, Math.floor(Math.min(a.x, b.x) - radius));
    const x1 = Math.min(width - 1, Math.ceil(Math.max(a.x, b.x) + radius));
    const y0 = Math.max(0, Math.floor(Math.min(a.y, b.y) - radius));
    const y1 = Math.min(height - 1, Math.ceil(Math.max(a.y, b.y) + radius));
    for (let y = y0; y <= y1; y++) {
      const cy = y + 0.5;
      const row = y * width;
      for (let x = x0; x <= x1; x++) {
        const cx = x + 0.5;
        if (segmentDistanceSq(cx, cy, a.x, a.y, b.x, b.y) <= r2) {
          target[row + x] = stroke.erase ? background[row + x]! : 0;
        }
      }
    }
  }
}

// Flatten strokes over a background template. Ink paints black; erase
// restores the background pixel. Strokes apply in list order, so replaying
// the same list over the same background is byte-identical by construction.
export function rasterize(background: GrayRaster, strokes: readonly Stroke[]): GrayRaster {
  const out = cloneRaster(background);
  for (const stroke of strokes) {
    stampStroke(out.pixels, background.pixels, out.width, out.height, stroke);
  }
  return out;
}
