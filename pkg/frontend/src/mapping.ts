// Affine, invertible mapping between workspace meters and canvas pixels.
// Uniform scale (aspect preserved), y axis flipped, centered with a margin.

export interface Workspace {
  x_min: number;
  x_max: number;
  y_min: number;
  y_max: number;
}

export class Mapping {
  readonly scale: number; // px per meter
  readonly ox: number;
  readonly oy: number;

  constructor(
    readonly ws: Workspace,
    readonly width: number,
    readonly height: number,
    margin = 20,
  ) {
    const w = ws.x_max - ws.x_min;
    const h = ws.y_max - ws.y_min;
    this.scale = Math.min((width - 2 * margin) / w, (height - 2 * margin) / h);
    // center of the workspace lands on the center of the canvas
    this.ox = width / 2 - this.scale * (ws.x_min + w / 2);
    this.oy = height / 2 + this.scale * (ws.y_min + h / 2);
  }

  toScreen(x: number, y: number): [number, number] {
    return [this.ox + this.scale * x, this.oy - this.scale * y];
  }

  toWorkspace(px: number, py: number): [number, number] {
    return [(px - this.ox) / this.scale, (this.oy - py) / this.scale];
  }

  /** Clamp a workspace point into the reachable rectangle. */
  clamp(x: number, y: number): [number, number] {
    return [
      Math.min(Math.max(x, this.ws.x_min), this.ws.x_max),
      Math.min(Math.max(y, this.ws.y_min), this.ws.y_max),
    ];
  }

  metersToPx(m: number): number {
    return m * this.scale;
  }
}
