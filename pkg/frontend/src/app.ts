/**
 * Control-room entry point: one WebSocket (via the NDJSON bridge), one
 * store, and direct DOM rendering on every message. Reconnects rebuild
 * the store from the server's snapshot replay, which the hello contract
 * guarantees on each connection.
 */

import { difficultySteps, domainOf, linePath, Scale, stepPath } from "./chart.js";
import { encodeClientMessage } from "./protocol.js";
import {
  applyServerLine,
  ClientStore,
  commandFor,
  freshStore,
  UiAction,
} from "./store.js";

const RECONNECT_DELAY_MS = 2000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

let store: ClientStore = freshStore();
let socket: WebSocket | null = null;

function bridgeUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("bridge");
  if (fromQuery !== null) return fromQuery;
  return `ws://${window.location.hostname || "127.0.0.1"}:8900`;
}

function send(action: UiAction): void {
  if (socket === null || socket.readyState !== WebSocket.OPEN) return;
  socket.send(encodeClientMessage(commandFor(action)).trimEnd());
}

function connect(): void {
  store = freshStore();
  const ws = new WebSocket(bridgeUrl());
  socket = ws;
  ws.onmessage = (ev) => {
    applyServerLine(store, String(ev.data));
    render();
  };
  ws.onclose = () => {
    store.connection = "closed";
    render();
    window.setTimeout(connect, RECONNECT_DELAY_MS);
  };
  ws.onerror = () => ws.close();
}

function fmt(x: number | null | undefined, digits = 3): string {
  return x === null || x === undefined ? "-" : x.toFixed(digits);
}

function renderStatus(): void {
  const hello = store.hello;
  el("status").textContent =
    store.connection === "connected" && hello !== null
      ? `${hello.env.env_id} run ${hello.run_id} | levels 0..${hello.env.max_level} | ` +
        `${hello.total_steps} steps | ${store.paused ? "paused" : "running"}`
      : store.connection === "closed"
        ? "disconnected, retrying..."
        : "connecting...";
}

function renderCharts(): void {
  const width = 640;
  const height = 220;
  const pad = 30;
  const xDomain = domainOf(
    [store.trainReturn, store.evalCurrent, store.evalUltimate],
    (p) => p.step,
  );
  const sx: Scale = { domainMin: 0, domainMax: Math.max(xDomain[1], 1), rangeMin: pad, rangeMax: width - 8 };
  const yDomain = domainOf(
    [store.trainReturn, store.evalCurrent, store.evalUltimate],
    (p) => p.value,
  );
  const sy: Scale = { domainMin: yDomain[0], domainMax: yDomain[1], rangeMin: height - pad, rangeMax: 8 };
  el("train-path").setAttribute("d", linePath(store.trainReturn, sx, sy));
  el("eval-current-path").setAttribute("d", linePath(store.evalCurrent, sx, sy));
  el("eval-ultimate-path").setAttribute("d", linePath(store.evalUltimate, sx, sy));

  const maxLevel = store.hello?.env.max_level ?? 1;
  const totalSteps = store.hello?.total_steps;
  const steps = difficultySteps(store.events, totalSteps);
  const dx: Scale = {
    domainMin: 0,
    domainMax: Math.max(totalSteps ?? xDomain[1], 1),
    rangeMin: pad,
    rangeMax: width - 8,
  };
  const dy: Scale = { domainMin: 0, domainMax: maxLevel, rangeMin: height - pad, rangeMax: 8 };
  el("difficulty-path").setAttribute("d", stepPath(steps, dx, dy));
}

function renderPrompt(): void {
  const modal = el("decision-modal");
  const pending = store.pending;
  modal.style.display = pending === null ? "none" : "flex";
  for (const id of ["btn-easier", "btn-unchanged", "btn-harder", "btn-set"]) {
    (el(id) as HTMLButtonElement).disabled = pending === null;
  }
  (el("level-slider") as HTMLInputElement).disabled = pending === null;
  if (pending === null) return;
  el("prompt-title").textContent =
    `Decision ${pending.index + 1}/10 at step ${pending.step} ` +
    `(level ${pending.currentLevel} of 0..${pending.maxLevel})`;
  const cards = pending.reports
    .map(
      (r) =>
        `<div class="report"><b>level ${r.level}</b> over ${r.episodes} episodes<br>` +
        `success ${fmt(r.success_rate)} | return ${fmt(r.mean_return)}` +
        ` &plusmn; ${fmt(r.return_std)}<br>mean length ${fmt(r.mean_episode_length, 1)}</div>`,
    )
    .join("");
  el("prompt-reports").innerHTML = cards;
  const slider = el<HTMLInputElement>("level-slider");
  slider.max = String(pending.maxLevel);
  el("slider-value").textContent = slider.value;
}

function renderFeed(): void {
  const feed = el("feed");
  feed.innerHTML = store.feed
    .slice(-80)
    .map(
      (entry) =>
        `<li class="${entry.kind}">` +
        `${entry.step !== null ? `<span class="step">@${entry.step}</span> ` : ""}` +
        `${entry.text}</li>`,
    )
    .join("");
  feed.scrollTop = feed.scrollHeight;
}

function render(): void {
  renderStatus();
  renderCharts();
  renderPrompt();
  renderFeed();
}

export function main(): void {
  el("btn-easier").onclick = () => send({ kind: "easier" });
  el("btn-unchanged").onclick = () => send({ kind: "unchanged" });
  el("btn-harder").onclick = () => send({ kind: "harder" });
  el("btn-set").onclick = () => {
    const value = Number(el<HTMLInputElement>("level-slider").value);
    send({ kind: "set", value });
  };
  el("level-slider").oninput = () => {
    el("slider-value").textContent = el<HTMLInputElement>("level-slider").value;
  };
  el("btn-pause").onclick = () => send({ kind: "pause" });
  el("btn-play").onclick = () => send({ kind: "play" });
  el("btn-save").onclick = () => send({ kind: "save" });
  connect();
  render();
}

main();
