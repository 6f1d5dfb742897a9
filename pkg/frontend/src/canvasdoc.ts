import type { GrayRaster, Stroke, StrokePoint } from "./raster";
import { cloneRaster, rasterize } from "./raster";
import { encodeGrayPng } from "./png";

// The canvas document: strokes over a template background. Undo pops to a
// redo stack; any new stroke invalidates the redo chain. Export flattens
// through the software rasterizer, so export resolution always equals the
// template resolution and identical stroke lists give identical bytes.

export class CanvasDocument {
  readonly strokes: Stroke[] = [];
  private readonly redoStack: Stroke[] = [];
  private current: Stroke | null = null;

  constructor(
    readonly templateId: string,
    private readonly background: GrayRaster,
  ) {}

  get width(): number {
    return this.background.width;
  }

  get height(): number {
    return this.background.height;
  }

  beginStroke(p: StrokePoint, width: number, erase = false): void {
    if (this.current) this.endStroke();
    this.current = { points: [p], width, erase };
    this.strokes.push(this.current);
    this.redoStack.length = 0;
  }

  extendStroke(p: StrokePoint): void {
    if (!this.current) return;
    this.current.points.push(p);
  }

  endStroke(): void {
    this.current = null;
  }

  undo(): boolean {
    this.endStroke();
    const popped = this.strokes.pop();
    if (!popped) return false;
    this.redoStack.push(popped);
    return true;
  }

  redo(): boolean {
    const popped = this.redoStack.pop();
    if (!popped) return false;
    this.strokes.push(popped);
    return true;
  }

  clear(): void {
    this.endStroke();
    this.strokes.length = 0;
    this.redoStack.length = 0;
  }

  canUndo(): boolean {
    return this.strokes.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  backgroundCopy(): GrayRaster {
    return cloneRaster(this.background);
  }

  exportRaster(): GrayRaster {
    return rasterize(this.background, this.strokes);
  }

  exportPng(): Uint8Array {
    return encodeGrayPng(this.exportRaster());
  }
}
