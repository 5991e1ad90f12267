// Entry point: canvas, pointer and keyboard wiring, render loop.

import { SessionClient } from "./client.js";
import { InputChannel, INPUT_RATE_HZ } from "./input.js";
import { Mapping } from "./mapping.js";
import { paint, paintOverlay } from "./renderer.js";
import { describeScene } from "./scene.js";

const canvas = document.getElementById("game") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const startBtn = document.getElementById("start") as HTMLButtonElement;

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const socket = new WebSocket(wsUrl);
const client = new SessionClient(socket);
const channel = new InputChannel({
  get open() {
    return socket.readyState === WebSocket.OPEN;
  },
  send: (text) => socket.send(text),
});

let mapping: Mapping | null = null;
let pointer: [number, number] = [0, 0];
let lift = false;

client.onchange = () => {
  channel.joined = client.joined !== null;
  if (client.joined && mapping === null) {
    mapping = new Mapping(client.joined.workspace, canvas.width, canvas.height);
    pointer = [
      (client.joined.workspace.x_min + client.joined.workspace.x_max) / 2,
      (client.joined.workspace.y_min + client.joined.workspace.y_max) / 2,
    ];
  }
  refreshStatus();
};

function refreshStatus(): void {
  const parts = [`state: ${client.status}`];
  if (client.joined) {
    parts.push(`subject ${client.joined.subject}`);
    parts.push(`next trial ${client.joined.next_trial}/${client.joined.trials}`);
  }
  if (client.lastSummary) {
    const s = client.lastSummary;
    parts.push(`last trial: ${s.flags_collected} flags in ${s.task_time.toFixed(1)} s`);
  }
  if (client.lastError) parts.push(`server: ${client.lastError}`);
  parts.push(lift ? "LIFTED (space to rest)" : "resting (space to lift)");
  statusEl.textContent = parts.join(" | ");
  startBtn.disabled = client.status === "trial_running"
    || client.status === "session_done" || client.status === "connecting";
}

startBtn.onclick = () => client.startTrial();

canvas.addEventListener("pointermove", (ev) => {
  if (mapping === null) return;
  const rect = canvas.getBoundingClientRect();
  const px = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const py = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  pointer = mapping.clamp(...mapping.toWorkspace(px, py));
});

window.addEventListener("keydown", (ev) => {
  if (ev.code === "Space") {
    ev.preventDefault();
    lift = !lift;
    if (!lift) channel.sendRest();
    refreshStatus();
  }
});

setInterval(() => {
  if (client.status === "trial_running") {
    channel.sendInput(pointer[0], pointer[1], lift);
  }
}, 1000 / INPUT_RATE_HZ);

function frame(): void {
  if (mapping !== null && client.joined !== null) {
    const interval = 1000 / client.joined.snapshot_rate;
    const view = client.buffer.view(Date.now(), interval);
    if (view !== null) {
      paint(ctx, describeScene(view, mapping), canvas.width, canvas.height);
      if (client.degraded()) {
        paintOverlay(ctx, "connection degraded", canvas.width, canvas.height);
      }
    } else {
      ctx.fillStyle = "#1a1b1e";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
      ctx.fillStyle = "#adb5bd";
      ctx.font = "18px system-ui, sans-serif";
      ctx.fillText("press Start Trial to play", 20, 40);
    }
  }
  requestAnimationFrame(frame);
}

refreshStatus();
requestAnimationFrame(frame);
