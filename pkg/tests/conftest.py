"""Shared test helpers: tiny run configs and a raw wire-protocol client.

The tiny budget (total=1000, workers=2, horizon=25) gives a 50-step round,
a 100-step decision interval, and an eval tick every 50 steps: 20 rounds,
10 curriculum events, 22 current evals and 21 ultimate evals per run.
"""

import json
import os
import socket
import threading
import time

from hcrl.envs.core import EnvId
from hcrl.ppo import PpoConfig
from hcrl.session.config import RunConfig
from hcrl.session.protocol import validate_server_message
from hcrl.session.runner import run_training

AUTO_RAMP_5 = [0, 1, 1, 2, 2, 3, 3, 4, 4, 5]


def tiny_config(run_dir, source="auto", total=1000, bind=None, auto_continue=None, seed=7):
    ppo = PpoConfig(total_steps=total, horizon=25, workers=2)
    return RunConfig(
        env_id=EnvId.GRIDWORLD,
        source=source,
        ppo=ppo,
        seed=seed,
        eval_episodes=2,
        auto_continue=auto_continue,
        run_dir=run_dir,
        bind=bind,
    )


def start_run(config):
    """run_training on a thread; the returned list gets its exit code (or error)."""
    outcome = []

    def target():
        try:
            outcome.append(run_training(config))
        except BaseException as exc:
            outcome.append(exc)

    thread = threading.Thread(target=target, daemon=True)
    thread.start()
    return thread, outcome


def wait_for_address(run_dir, timeout=15.0):
    path = os.path.join(run_dir, "server.address")
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read().strip()
            if text:
                return text
        time.sleep(0.01)
    raise AssertionError("server.address never appeared")


class LineClient:
    """Newline-framed JSON test client that validates every inbound line."""

    def __init__(self, address, deadline=60.0):
        host, port = address.rsplit(":", 1)
        self.sock = socket.create_connection((host, int(port)), timeout=5.0)
        self.sock.settimeout(0.2)
        self.buffer = b""
        self.messages = []
        self.closed = False
        self.deadline = time.monotonic() + deadline

    def send(self, payload):
        self.sock.sendall((json.dumps(payload) + "\n").encode("utf-8"))

    def send_raw(self, data):
        self.sock.sendall(data)

    def _pump(self):
        try:
            chunk = self.sock.recv(65536)
        except socket.timeout:
            return
        if not chunk:
            self.closed = True
            return
        self.buffer += chunk
        while b"\n" in self.buffer:
            line, self.buffer = self.buffer.split(b"\n", 1)
            if not line.strip():
                continue
            message = json.loads(line)
            validate_server_message(message)
            self.messages.append(message)

    def read_until(self, pred, after=0, what="message"):
        while True:
            for message in self.messages[after:]:
                if pred(message):
                    return message
            if self.closed or time.monotonic() > self.deadline:
                raise AssertionError(f"did not receive {what}")
            self._pump()

    def read_to_eof(self):
        while not self.closed and time.monotonic() < self.deadline:
            self._pump()
        assert self.closed, "server did not close the stream in time"
        return self.messages

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
