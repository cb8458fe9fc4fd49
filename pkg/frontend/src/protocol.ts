/**
 * Typed view of the session-service wire protocol (docs/protocol.md).
 *
 * One JSON object per newline-terminated line. Server messages carry
 * run_id and a per-connection seq starting at 1. Unknown types must be
 * tolerated on both sides, so parsing keeps unrecognized-but-well-formed
 * messages instead of rejecting them.
 */

export interface EvalReport {
  level: number;
  max_level: number;
  episodes: number;
  mean_return: number;
  return_std: number;
  success_rate: number;
  mean_episode_length: number;
  seed: number;
  params_version: number;
}

export interface EnvDescriptor {
  env_id: string;
  obs_dim: number;
  action_count: number;
  max_level: number;
  max_episode_steps: number;
  timeout_bootstrap: boolean;
}

interface ServerBase {
  run_id: string;
  seq: number;
}

export interface HelloMessage extends ServerBase {
  type: "hello";
  env: EnvDescriptor;
  total_steps: number;
  protocol: number;
}

export interface MetricsMessage extends ServerBase {
  type: "metrics";
  step: number;
  difficulty: number;
  mean_episodic_return: number | null;
  episodes: number;
  steps_per_sec: number | null;
  policy_loss: number;
  value_loss: number;
  entropy: number;
  approx_kl: number;
}

export interface EvalMessage extends ServerBase {
  type: "eval";
  step: number;
  kind: "current" | "ultimate";
  report: EvalReport;
}

export interface DecisionPointMessage extends ServerBase {
  type: "decision_point";
  index: number;
  step: number;
  reports: EvalReport[];
  current_level: number;
  max_level: number;
}

export interface EventMessage extends ServerBase {
  type: "event";
  global_step: number;
  source: string;
  old_level: number;
  new_level: number;
  wall_clock: number;
}

export interface PausedMessage extends ServerBase {
  type: "paused";
}

export interface ResumedMessage extends ServerBase {
  type: "resumed";
}

export interface SavedMessage extends ServerBase {
  type: "saved";
  path: string;
}

export interface ErrorMessage extends ServerBase {
  type: "error";
  message: string;
}

/** Well-formed message whose type this client does not know. */
export interface UnknownMessage extends ServerBase {
  type: string;
}

export type ServerMessage =
  | HelloMessage
  | MetricsMessage
  | EvalMessage
  | DecisionPointMessage
  | EventMessage
  | PausedMessage
  | ResumedMessage
  | SavedMessage
  | ErrorMessage
  | UnknownMessage;

export type CommandOp = "easier" | "harder" | "unchanged";

export type ClientMessage =
  | { type: "subscribe" }
  | { type: "command"; op: CommandOp }
  | { type: "command"; op: "set"; value: number }
  | { type: "pause" }
  | { type: "play" }
  | { type: "save" };

const KNOWN_TYPES = new Set([
  "hello",
  "metrics",
  "eval",
  "decision_point",
  "event",
  "paused",
  "resumed",
  "saved",
  "error",
]);

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isNullableNumber(x: unknown): x is number | null {
  return x === null || isFiniteNumber(x);
}

function isReport(x: unknown): x is EvalReport {
  if (!isRecord(x)) return false;
  return (
    isFiniteNumber(x.level) &&
    isFiniteNumber(x.max_level) &&
    isFiniteNumber(x.episodes) &&
    isFiniteNumber(x.mean_return) &&
    isFiniteNumber(x.return_std) &&
    isFiniteNumber(x.success_rate) &&
    isFiniteNumber(x.mean_episode_length) &&
    isFiniteNumber(x.seed) &&
    isFiniteNumber(x.params_version)
  );
}

function isDescriptor(x: unknown): x is EnvDescriptor {
  if (!isRecord(x)) return false;
  return (
    typeof x.env_id === "string" &&
    isFiniteNumber(x.obs_dim) &&
    isFiniteNumber(x.action_count) &&
    isFiniteNumber(x.max_level) &&
    isFiniteNumber(x.max_episode_steps) &&
    typeof x.timeout_bootstrap === "boolean"
  );
}

/** Per-type structural checks beyond the shared envelope. */
function bodyIsValid(msg: Record<string, unknown>): boolean {
  switch (msg.type) {
    case "hello":
      return (
        isDescriptor(msg.env) &&
        isFiniteNumber(msg.total_steps) &&
        isFiniteNumber(msg.protocol)
      );
    case "metrics":
      return (
        isFiniteNumber(msg.step) &&
        isFiniteNumber(msg.difficulty) &&
        isNullableNumber(msg.mean_episodic_return) &&
        isFiniteNumber(msg.episodes) &&
        isNullableNumber(msg.steps_per_sec) &&
        isFiniteNumber(msg.policy_loss) &&
        isFiniteNumber(msg.value_loss) &&
        isFiniteNumber(msg.entropy) &&
        isFiniteNumber(msg.approx_kl)
      );
    case "eval":
      return (
        isFiniteNumber(msg.step) &&
        (msg.kind === "current" || msg.kind === "ultimate") &&
        isReport(msg.report)
      );
    case "decision_point":
      return (
        isFiniteNumber(msg.index) &&
        isFiniteNumber(msg.step) &&
        Array.isArray(msg.reports) &&
        msg.reports.every(isReport) &&
        isFiniteNumber(msg.current_level) &&
        isFiniteNumber(msg.max_level)
      );
    case "event":
      return (
        isFiniteNumber(msg.global_step) &&
        typeof msg.source === "string" &&
        isFiniteNumber(msg.old_level) &&
        isFiniteNumber(msg.new_level) &&
        isFiniteNumber(msg.wall_clock)
      );
    case "paused":
    case "resumed":
      return true;
    case "saved":
      return typeof msg.path === "string";
    case "error":
      return typeof msg.message === "string";
    default:
      // well-formed envelope with an unknown type: keep it
      return true;
  }
}

/**
 * Parse one wire line into a typed server message.
 *
 * Returns null for anything malformed: non-JSON, non-object, missing
 * type/run_id/seq envelope, or a known type whose body fails its checks.
 * Unknown types with a valid envelope parse as UnknownMessage.
 */
export function parseServerLine(line: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return null;
  }
  if (!isRecord(raw)) return null;
  if (typeof raw.type !== "string") return null;
  if (typeof raw.run_id !== "string") return null;
  if (!isFiniteNumber(raw.seq) || !Number.isInteger(raw.seq) || raw.seq < 1) return null;
  if (!bodyIsValid(raw)) return null;
  return raw as unknown as ServerMessage;
}

export function isKnownType(type: string): boolean {
  return KNOWN_TYPES.has(type);
}

/** Serialize a client message onto the wire (newline-terminated). */
export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg) + "\n";
}
