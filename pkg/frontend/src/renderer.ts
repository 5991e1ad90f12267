// Canvas painter for the top-down task view.

import type { Scene } from "./scene.js";
import { ELIGIBLE_COLOR } from "./scene.js";

export function paint(ctx: CanvasRenderingContext2D, scene: Scene,
                      width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#1a1b1e";
  ctx.fillRect(0, 0, width, height);

  // table surface
  ctx.fillStyle = "#3b2f23";
  ctx.fillRect(scene.table.x, scene.table.y, scene.table.w, scene.table.h);
  ctx.strokeStyle = "#5c4a35";
  ctx.strokeRect(scene.table.x, scene.table.y, scene.table.w, scene.table.h);

  if (scene.blueSquare) {
    const s = scene.blueSquare;
    ctx.fillStyle = ELIGIBLE_COLOR;
    ctx.fillRect(s.x - s.size / 2, s.y - s.size / 2, s.size, s.size);
  }

  for (const f of scene.flags) {
    ctx.fillStyle = f.color;
    ctx.beginPath();
    ctx.arc(f.x, f.y, f.r, 0, 2 * Math.PI);
    ctx.fill();
  }

  // bowl: filled disc when lifted, outline when resting on the table
  ctx.lineWidth = 3;
  ctx.strokeStyle = "#ced4da";
  ctx.beginPath();
  ctx.arc(scene.bowl.x, scene.bowl.y, scene.bowl.r, 0, 2 * Math.PI);
  if (scene.bowl.lifted) {
    ctx.fillStyle = "rgba(206, 212, 218, 0.25)";
    ctx.fill();
  }
  ctx.stroke();

  ctx.fillStyle = scene.ball.color;
  ctx.beginPath();
  ctx.arc(scene.ball.x, scene.ball.y, scene.ball.r, 0, 2 * Math.PI);
  ctx.fill();

  ctx.fillStyle = "#f1f3f5";
  ctx.font = "16px system-ui, sans-serif";
  ctx.fillText(scene.hud.score, 12, 24);
  ctx.fillText(scene.hud.time, 12, 46);
  ctx.fillText(scene.hud.trial, 12, 68);
}

export function paintOverlay(ctx: CanvasRenderingContext2D, text: string,
                             width: number, height: number): void {
  ctx.fillStyle = "rgba(0, 0, 0, 0.6)";
  ctx.fillRect(0, 0, width, height);
  ctx.fillStyle = "#ffa94d";
  ctx.font = "20px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(text, width / 2, height / 2);
  ctx.textAlign = "left";
}
