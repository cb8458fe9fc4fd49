"""TCP fan-out server for a single training run.

One acceptor thread; one reader thread per client connection. Outbound
messages are stamped with the run id and a per-connection monotone
sequence number under that connection's write lock. Inbound difficulty
commands funnel into the run's CommandChannel and pause/play/save requests
into an ordered control queue - the training loop consumes both at its own
safe points and never touches sockets.

A client connecting mid-run receives hello, then a replay of every
metrics/eval/event message so far (the state snapshot), then the pending
decision prompt and pause notice when applicable, then live messages.
"""

from __future__ import annotations

import queue
import socket
import threading

from hcrl.curriculum import CommandChannel, CommandOp, DifficultyCommand
from hcrl.session import protocol


def parse_bind(bind: str) -> tuple[str, int]:
    host, _, port = bind.rpartition(":")
    if not host or not port:
        raise ValueError(f"bind address must be host:port, got {bind!r}")
    return host, int(port)


class _Connection:
    def __init__(self, sock: socket.socket, server: "SessionServer"):
        self._sock = sock
        self._server = server
        self._lock = threading.Lock()
        self._seq = 0
        self.alive = True
        self._reader = threading.Thread(
            target=self._read_loop, name="session-conn-reader", daemon=True
        )

    def start(self) -> None:
        self._reader.start()

    def send(self, payload: dict) -> None:
        """Stamp run_id + seq and write one line; drops the connection on failure."""
        with self._lock:
            if not self.alive:
                return
            self._seq += 1
            message = {
                "type": payload["type"],
                "run_id": self._server.run_id,
                "seq": self._seq,
                **{k: v for k, v in payload.items() if k != "type"},
            }
            try:
                self._sock.sendall(protocol.encode(message))
            except OSError:
                self.alive = False

    def close(self) -> None:
        self.alive = False
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass

    def _read_loop(self) -> None:
        try:
            with self._sock.makefile("rb") as stream:
                for line in stream:
                    if not line.strip():
                        continue
                    self._handle_line(line)
        except (OSError, ValueError):
            pass
        finally:
            self.alive = False
            self._server._forget(self)

    def _handle_line(self, line: bytes) -> None:
        try:
            message = protocol.decode_line(line)
            protocol.validate_client_message(message)
        except protocol.MalformedMessage as exc:
            self.send({"type": "error", "message": str(exc)})
            return

        run_id = message.get("run_id")
        if run_id is not None and run_id != self._server.run_id:
            self.send({"type": "error", "message": f"unknown run: {run_id}"})
            return

        msg_type = message["type"]
        if msg_type == "subscribe":
            self._server._send_snapshot(self)
        elif msg_type == "command":
            self._handle_command(message)
        elif msg_type in ("pause", "play", "save"):
            self._server.control_queue.put(msg_type)
        # Unknown types: ignored by contract.

    def _handle_command(self, message: dict) -> None:
        op = CommandOp(message["op"])
        value = message.get("value")
        if op is CommandOp.SET:
            if value is None or not (0 <= int(value) <= self._server.max_level):
                self.send(
                    {
                        "type": "error",
                        "message": f"level out of range [0,{self._server.max_level}]",
                    }
                )
                return
            command = DifficultyCommand(op=op, value=int(value))
        else:
            command = DifficultyCommand(op=op)
        self._server.command_channel.put(command)


class SessionServer:
    def __init__(
        self,
        bind: str,
        run_id: str,
        env_descriptor: dict,
        total_steps: int,
        max_level: int,
        command_channel: CommandChannel | None = None,
        control_queue: queue.Queue | None = None,
    ):
        self.run_id = run_id
        self.max_level = max_level
        self.command_channel = command_channel or CommandChannel()
        self.control_queue = control_queue or queue.Queue()
        self._hello = {
            "type": "hello",
            "env": env_descriptor,
            "total_steps": total_steps,
            "protocol": 1,
        }
        self._history: list[dict] = []
        self._pending_decision: dict | None = None
        self._paused = False
        self._state_lock = threading.Lock()
        self._connections: list[_Connection] = []
        self._conn_lock = threading.Lock()
        self._closed = False

        host, port = parse_bind(bind)
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(16)
        self._acceptor = threading.Thread(
            target=self._accept_loop, name="session-acceptor", daemon=True
        )
        self._acceptor.start()

    @property
    def address(self) -> str:
        host, port = self._listener.getsockname()[:2]
        return f"{host}:{port}"

    def broadcast(self, payload: dict) -> None:
        """Send to every live connection and fold into the join snapshot."""
        with self._state_lock:
            msg_type = payload["type"]
            if msg_type in ("metrics", "eval", "event"):
                self._history.append(payload)
            if msg_type == "decision_point":
                self._pending_decision = payload
            elif msg_type == "event":
                self._pending_decision = None
            elif msg_type == "paused":
                self._paused = True
            elif msg_type == "resumed":
                self._paused = False
        with self._conn_lock:
            connections = list(self._connections)
        for conn in connections:
            conn.send(payload)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._conn_lock:
            connections = list(self._connections)
            self._connections.clear()
        for conn in connections:
            conn.close()
        # No more commands can arrive; unblock any waiting decision.
        self.command_channel.close()

    def _accept_loop(self) -> None:
        while True:
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Connection(sock, self)
            with self._conn_lock:
                self._connections.append(conn)
            self._send_snapshot(conn)
            conn.start()

    def _send_snapshot(self, conn: _Connection) -> None:
        with self._state_lock:
            history = list(self._history)
            pending = self._pending_decision
            paused = self._paused
        conn.send(self._hello)
        for payload in history:
            conn.send(payload)
        if pending is not None:
            conn.send(pending)
        if paused:
            conn.send({"type": "paused"})

    def _forget(self, conn: _Connection) -> None:
        with self._conn_lock:
            if conn in self._connections:
                self._connections.remove(conn)
