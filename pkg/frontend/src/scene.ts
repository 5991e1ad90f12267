// Pure scene description: snapshot view -> drawable primitives.
// Keeping this free of canvas calls makes the game's display rules
// (blue eligibility square, ball color, flag dots) directly testable.

import type { InterpolatedView } from "./interpolation.js";
import type { Mapping } from "./mapping.js";

export const BALL_COLOR_IN = "#f2c522"; // yellow: ball inside the bowl
export const BALL_COLOR_OUT = "#e03131"; // red: ball fell out
export const ELIGIBLE_COLOR = "#2b6cdf"; // blue square under the bowl
export const FLAG_COLOR = "#2f9e44";
export const BOWL_RADIUS_M = 0.045;
export const BALL_VISUAL_GAIN = 0.05; // meters of dot offset per radian

export interface Circle {
  x: number;
  y: number;
  r: number;
  color: string;
}

export interface Scene {
  table: { x: number; y: number; w: number; h: number };
  blueSquare: { x: number; y: number; size: number } | null;
  flags: Circle[];
  bowl: Circle & { lifted: boolean };
  ball: Circle;
  hud: { score: string; time: string; trial: string };
}

export function describeScene(view: InterpolatedView, map: Mapping): Scene {
  const snap = view.latest;
  const [tx0, ty0] = map.toScreen(map.ws.x_min, map.ws.y_max);
  const [tx1, ty1] = map.toScreen(map.ws.x_max, map.ws.y_min);
  const [bx, by] = map.toScreen(view.bowl[0], view.bowl[1]);
  const bowlR = map.metersToPx(BOWL_RADIUS_M);

  // ball dot offset from the bowl center by the pendulum deflection
  const [ballX, ballY] = map.toScreen(
    view.bowl[0] + BALL_VISUAL_GAIN * Math.sin(view.ball[0]),
    view.bowl[1] + BALL_VISUAL_GAIN * Math.sin(view.ball[1]),
  );

  return {
    table: { x: tx0, y: ty0, w: tx1 - tx0, h: ty1 - ty0 },
    blueSquare: snap.eligible
      ? { x: bx, y: by, size: 2.6 * bowlR }
      : null,
    flags: snap.flags.map(([fx, fy]) => {
      const [sx, sy] = map.toScreen(fx, fy);
      return { x: sx, y: sy, r: Math.max(map.metersToPx(0.008), 3), color: FLAG_COLOR };
    }),
    bowl: { x: bx, y: by, r: bowlR, color: "#868e96", lifted: snap.lifted },
    ball: {
      x: ballX,
      y: ballY,
      r: Math.max(map.metersToPx(0.012), 4),
      color: snap.in_bowl ? BALL_COLOR_IN : BALL_COLOR_OUT,
    },
    hud: {
      score: `flags ${snap.collected}/${snap.collected + snap.flags.length}`,
      time: `${snap.time_left.toFixed(1)} s`,
      trial: `trial ${snap.trial} / set ${snap.set}`,
    },
  };
}
