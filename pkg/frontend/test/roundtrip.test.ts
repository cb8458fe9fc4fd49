/**
 * Live round-trip against a real training session: the store drives the
 * same code path the browser uses, the Python CLI provides the backend,
 * and the assertions are the control-room contract:
 *
 *   - answering Harder at a decision point produces a curriculum event
 *     with new_level = old + 1 in the feed before the next metrics
 *     message
 *   - a slider Set is reflected identically
 *   - the difficulty step function equals the run's events.log exactly
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { difficultySteps } from "../src/chart.js";
import { EventMessage, ServerMessage } from "../src/protocol.js";
import { commandFor } from "../src/store.js";
import {
  readEventsLog,
  SessionClient,
  startTraining,
  TrainingSession,
  waitForAddress,
} from "./live.js";

const eventOrMetrics = (m: ServerMessage) => m.type === "event" || m.type === "metrics";

describe("control room round trip", () => {
  let session: TrainingSession;
  let client: SessionClient;

  beforeAll(async () => {
    session = startTraining([
      "--source",
      "human",
      "--steps",
      "2000",
      "--seed",
      "11",
      "--auto-continue",
      "60",
    ]);
    const [host, port] = await waitForAddress(session.runDir);
    client = new SessionClient(host, port);
    await client.nextAfter(0, (m) => m.type === "hello");
  });

  afterAll(async () => {
    client?.destroy();
    session?.proc.kill();
    await session?.exit;
  });

  it("steers all ten decisions and conforms to the feed-ordering contract", async () => {
    // decision 0: Harder. The event must precede any further metrics.
    let found = await client.nextAfter(0, (m) => m.type === "decision_point");
    expect(client.store.pending).not.toBeNull();
    const levelBefore = client.store.pending!.currentLevel;
    let mark = client.arrivals.length;
    const feedBefore = client.store.feed.length;
    client.send(commandFor({ kind: "harder" }));
    let next = await client.nextAfter(mark, eventOrMetrics);
    expect(next.msg.type).toBe("event");
    const harderEvent = next.msg as EventMessage;
    expect(harderEvent.new_level).toBe(levelBefore + 1);
    expect(harderEvent.old_level).toBe(levelBefore);
    expect(harderEvent.source).toBe("human");
    expect(client.store.feed.length).toBeGreaterThan(feedBefore);
    expect(client.store.feed.at(-1)?.kind).toBe("event");
    expect(client.store.pending).toBeNull();

    // decision 1: slider Set to 3, reflected identically under the same ordering.
    found = await client.nextAfter(next.index, (m) => m.type === "decision_point");
    mark = client.arrivals.length;
    client.send(commandFor({ kind: "set", value: 3 }));
    next = await client.nextAfter(mark, eventOrMetrics);
    expect(next.msg.type).toBe("event");
    const setEvent = next.msg as EventMessage;
    expect(setEvent.new_level).toBe(3);
    expect(setEvent.source).toBe("human");

    // remaining decisions: Unchanged through to completion.
    let cursor = next.index;
    for (let i = 2; i < 10; i += 1) {
      found = await client.nextAfter(cursor, (m) => m.type === "decision_point");
      client.send(commandFor({ kind: "unchanged" }));
      const resolved = await client.nextAfter(found.index, (m) => m.type === "event");
      expect((resolved.msg as EventMessage).new_level).toBe(3);
      cursor = resolved.index;
    }

    await client.untilClosed();
    expect(await session.exit).toBe(0);
  });

  it("reproduces the event log exactly in the difficulty step function", () => {
    const logged = readEventsLog(session.runDir);
    expect(logged).toHaveLength(10);
    expect(
      client.store.events.map((e) => ({
        global_step: e.global_step,
        source: e.source,
        old_level: e.old_level,
        new_level: e.new_level,
      })),
    ).toEqual(logged);

    const steps = difficultySteps(client.store.events);
    expect(steps[0]).toEqual({ step: 0, value: 0 });
    expect(steps.slice(1)).toEqual(
      logged.map((e) => ({ step: e.global_step, value: e.new_level })),
    );
    expect(logged.map((e) => e.new_level)).toEqual([1, 3, 3, 3, 3, 3, 3, 3, 3, 3]);
  });

  it("received a well-formed, gapless stream", () => {
    expect(client.store.dropped).toBe(0);
    const seqs = client.arrivals.map((m) => m.seq);
    expect(seqs).toEqual(Array.from({ length: seqs.length }, (_, i) => i + 1));
  });
});
