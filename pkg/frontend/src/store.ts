/**
 * Client-side session state: everything the control room renders.
 *
 * apply rules (one reducer for every inbound wire message):
 *   - a seq at or below the last applied one is a duplicate; the store is
 *     left untouched
 *   - metrics/eval append to their series; series stay strictly
 *     increasing in step, so replays and out-of-order points are no-ops
 *   - decision_point sets the single pending prompt (at most one)
 *   - event resolves the prompt, extends the difficulty history, and
 *     lands in the feed
 *   - unknown types advance seq tracking and are otherwise ignored
 */

import {
  ClientMessage,
  CommandOp,
  DecisionPointMessage,
  EvalReport,
  EventMessage,
  HelloMessage,
  ServerMessage,
  isKnownType,
  parseServerLine,
} from "./protocol.js";

export interface SeriesPoint {
  step: number;
  value: number;
}

export interface FeedEntry {
  kind: "event" | "saved" | "paused" | "resumed" | "error";
  text: string;
  step: number | null;
}

export interface DecisionPrompt {
  index: number;
  step: number;
  reports: EvalReport[];
  currentLevel: number;
  maxLevel: number;
}

export type ConnectionState = "idle" | "connected" | "closed";

export interface ClientStore {
  connection: ConnectionState;
  hello: HelloMessage | null;
  lastSeq: number;
  /** mean episodic return per training round (null returns skipped) */
  trainReturn: SeriesPoint[];
  /** greedy success rate at the level being trained */
  evalCurrent: SeriesPoint[];
  /** greedy success rate at the hardest level (generalization curve) */
  evalUltimate: SeriesPoint[];
  /** resolved difficulty decisions, in arrival order */
  events: EventMessage[];
  feed: FeedEntry[];
  pending: DecisionPrompt | null;
  paused: boolean;
  /** counters for diagnostics and tests */
  metricsSeen: number;
  dropped: number;
}

export function freshStore(): ClientStore {
  return {
    connection: "idle",
    hello: null,
    lastSeq: 0,
    trainReturn: [],
    evalCurrent: [],
    evalUltimate: [],
    events: [],
    feed: [],
    pending: null,
    paused: false,
    metricsSeen: 0,
    dropped: 0,
  };
}

function appendMonotone(series: SeriesPoint[], step: number, value: number): void {
  const last = series[series.length - 1];
  if (last !== undefined && step <= last.step) return;
  series.push({ step, value });
}

function promptFrom(msg: DecisionPointMessage): DecisionPrompt {
  return {
    index: msg.index,
    step: msg.step,
    reports: msg.reports,
    currentLevel: msg.current_level,
    maxLevel: msg.max_level,
  };
}

export function applyServerMessage(store: ClientStore, msg: ServerMessage): ClientStore {
  if (msg.seq <= store.lastSeq) return store;
  store.lastSeq = msg.seq;

  switch (msg.type) {
    case "hello":
      store.hello = msg as HelloMessage;
      store.connection = "connected";
      break;
    case "metrics": {
      const m = msg as import("./protocol.js").MetricsMessage;
      store.metricsSeen += 1;
      if (m.mean_episodic_return !== null) {
        appendMonotone(store.trainReturn, m.step, m.mean_episodic_return);
      }
      break;
    }
    case "eval": {
      const e = msg as import("./protocol.js").EvalMessage;
      const series = e.kind === "ultimate" ? store.evalUltimate : store.evalCurrent;
      appendMonotone(series, e.step, e.report.success_rate);
      break;
    }
    case "decision_point":
      store.pending = promptFrom(msg as DecisionPointMessage);
      break;
    case "event": {
      const ev = msg as EventMessage;
      store.events.push(ev);
      store.pending = null;
      store.feed.push({
        kind: "event",
        text: `level ${ev.old_level} -> ${ev.new_level} (${ev.source})`,
        step: ev.global_step,
      });
      break;
    }
    case "paused":
      store.paused = true;
      store.feed.push({ kind: "paused", text: "training paused", step: null });
      break;
    case "resumed":
      store.paused = false;
      store.feed.push({ kind: "resumed", text: "training resumed", step: null });
      break;
    case "saved":
      store.feed.push({
        kind: "saved",
        text: `checkpoint saved: ${(msg as import("./protocol.js").SavedMessage).path}`,
        step: null,
      });
      break;
    case "error":
      store.feed.push({
        kind: "error",
        text: (msg as import("./protocol.js").ErrorMessage).message,
        step: null,
      });
      break;
    default:
      if (!isKnownType(msg.type)) break; // forward compatibility: ignore
      break;
  }
  return store;
}

/** Parse-and-apply for one raw wire line; malformed lines are counted and dropped. */
export function applyServerLine(store: ClientStore, line: string): ClientStore {
  if (line.trim() === "") return store;
  const msg = parseServerLine(line);
  if (msg === null) {
    store.dropped += 1;
    return store;
  }
  return applyServerMessage(store, msg);
}

export type UiAction =
  | { kind: CommandOp }
  | { kind: "set"; value: number }
  | { kind: "pause" }
  | { kind: "play" }
  | { kind: "save" };

/**
 * Map a control-room action to its wire message.
 *
 * Difficulty actions are valid whether or not a prompt is pending (the
 * server queues them for the next decision point); the app merely greys
 * the buttons out between prompts. Set values outside [0, max_level]
 * would only bounce off the server with an error reply, so the caller
 * clamps via the slider bounds rather than here.
 */
export function commandFor(action: UiAction): ClientMessage {
  switch (action.kind) {
    case "easier":
    case "harder":
    case "unchanged":
      return { type: "command", op: action.kind };
    case "set":
      return { type: "command", op: "set", value: action.value };
    case "pause":
      return { type: "pause" };
    case "play":
      return { type: "play" };
    case "save":
      return { type: "save" };
  }
}
