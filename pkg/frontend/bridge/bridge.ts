/**
 * WebSocket-to-TCP bridge for the control room.
 *
 * Browsers cannot open raw TCP sockets, so this process stands between
 * the page and the training session: each WebSocket connection gets its
 * own TCP connection to the session's control socket, inbound TCP bytes
 * are reframed one NDJSON line per WebSocket message, and WebSocket
 * messages go out as newline-terminated lines. No parsing, no state: the
 * protocol stays end to end.
 *
 * usage: node dist/bridge/bridge.js --target 127.0.0.1:8765 [--listen 8900]
 */

import * as net from "node:net";
import process from "node:process";
import { WebSocket, WebSocketServer } from "ws";
import { LineSplitter } from "../src/lines.js";

export interface BridgeOptions {
  listenPort: number;
  targetHost: string;
  targetPort: number;
}

export interface RunningBridge {
  port: number;
  close: () => Promise<void>;
}

export function startBridge(options: BridgeOptions): Promise<RunningBridge> {
  const wss = new WebSocketServer({ host: "127.0.0.1", port: options.listenPort });

  wss.on("connection", (ws: WebSocket) => {
    const tcp = net.createConnection({ host: options.targetHost, port: options.targetPort });
    tcp.setEncoding("utf-8");
    const splitter = new LineSplitter();

    tcp.on("data", (chunk: string) => {
      for (const line of splitter.push(chunk)) {
        if (ws.readyState === WebSocket.OPEN) ws.send(line);
      }
    });
    tcp.on("close", () => ws.close());
    tcp.on("error", () => ws.close());

    ws.on("message", (data) => {
      const text = typeof data === "string" ? data : data.toString("utf-8");
      tcp.write(text.endsWith("\n") ? text : text + "\n");
    });
    ws.on("close", () => tcp.destroy());
    ws.on("error", () => tcp.destroy());
  });

  return new Promise((resolve, reject) => {
    wss.on("error", reject);
    wss.on("listening", () => {
      const address = wss.address();
      if (address === null || typeof address === "string") {
        reject(new Error("could not determine bridge port"));
        return;
      }
      resolve({
        port: address.port,
        close: () =>
          new Promise<void>((done) => {
            for (const client of wss.clients) client.terminate();
            wss.close(() => done());
          }),
      });
    });
  });
}

function parseArgs(argv: string[]): BridgeOptions {
  let listenPort = 8900;
  let target = "127.0.0.1:8765";
  for (let i = 0; i < argv.length; i += 1) {
    if (argv[i] === "--listen" && argv[i + 1] !== undefined) {
      listenPort = Number(argv[i + 1]);
      i += 1;
    } else if (argv[i] === "--target" && argv[i + 1] !== undefined) {
      target = String(argv[i + 1]);
      i += 1;
    }
  }
  const colon = target.lastIndexOf(":");
  if (colon < 0) throw new Error(`--target must be host:port, got ${target}`);
  return {
    listenPort,
    targetHost: target.slice(0, colon),
    targetPort: Number(target.slice(colon + 1)),
  };
}

const isMain =
  process.argv[1] !== undefined &&
  (process.argv[1].endsWith("bridge.js") || process.argv[1].endsWith("bridge.ts"));

if (isMain) {
  const options = parseArgs(process.argv.slice(2));
  startBridge(options)
    .then((bridge) => {
      console.log(
        `bridge listening on ws://127.0.0.1:${bridge.port} -> tcp://${options.targetHost}:${options.targetPort}`,
      );
    })
    .catch((err) => {
      console.error(String(err));
      process.exit(1);
    });
}
