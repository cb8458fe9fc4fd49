"""Newline-delimited JSON wire protocol between a run and its clients.

One JSON object per line over a plain TCP stream. Server-to-client
messages always carry the run_id and a per-connection monotone sequence
number; docs/protocol.md in the repository root freezes the field names.

Unknown message types must be ignored by receivers (forward
compatibility); malformed messages draw an error reply and are dropped
without closing the connection.
"""

from __future__ import annotations

import json

import jsonschema


class ProtocolError(Exception):
    pass


class MalformedMessage(ProtocolError):
    """Not JSON, not an object, or failing its type's schema."""


class UnknownRun(ProtocolError):
    """Message addressed to a run_id this server is not hosting."""


_REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "level",
        "max_level",
        "episodes",
        "mean_return",
        "return_std",
        "success_rate",
        "mean_episode_length",
        "seed",
        "params_version",
    ],
    "properties": {
        "level": {"type": "integer", "minimum": 0},
        "max_level": {"type": "integer", "minimum": 0},
        "episodes": {"type": "integer", "minimum": 1},
        "mean_return": {"type": "number"},
        "return_std": {"type": "number", "minimum": 0},
        "success_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "mean_episode_length": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
        "params_version": {"type": "integer", "minimum": 0},
    },
}

_ENVELOPE = {
    "run_id": {"type": "string", "minLength": 1},
    "seq": {"type": "integer", "minimum": 0},
}


def _server_schema(extra_required: list[str], extra_properties: dict) -> dict:
    return {
        "type": "object",
        "required": ["type", "run_id", "seq", *extra_required],
        "properties": {"type": {"type": "string"}, **_ENVELOPE, **extra_properties},
    }


SERVER_SCHEMAS: dict[str, dict] = {
    "hello": _server_schema(
        ["env", "total_steps", "protocol"],
        {
            "env": {
                "type": "object",
                "required": ["env_id", "obs_dim", "action_count", "max_level", "max_episode_steps"],
            },
            "total_steps": {"type": "integer", "minimum": 1},
            "protocol": {"type": "integer", "minimum": 1},
        },
    ),
    "metrics": _server_schema(
        ["step", "difficulty"],
        {
            "step": {"type": "integer", "minimum": 0},
            "difficulty": {"type": "integer", "minimum": 0},
            "mean_episodic_return": {"type": ["number", "null"]},
            "episodes": {"type": "integer", "minimum": 0},
            "steps_per_sec": {"type": ["number", "null"]},
            "policy_loss": {"type": "number"},
            "value_loss": {"type": "number"},
            "entropy": {"type": "number"},
            "approx_kl": {"type": "number"},
        },
    ),
    "eval": _server_schema(
        ["step", "kind", "report"],
        {
            "step": {"type": "integer", "minimum": 0},
            "kind": {"enum": ["current", "ultimate"]},
            "report": _REPORT_SCHEMA,
        },
    ),
    "decision_point": _server_schema(
        ["index", "step", "reports", "current_level", "max_level"],
        {
            "index": {"type": "integer", "minimum": 0, "maximum": 9},
            "step": {"type": "integer", "minimum": 0},
            "reports": {
                "type": "array",
                "items": _REPORT_SCHEMA,
                "minItems": 2,
                "maxItems": 2,
            },
            "current_level": {"type": "integer", "minimum": 0},
            "max_level": {"type": "integer", "minimum": 0},
        },
    ),
    "event": _server_schema(
        ["global_step", "source", "old_level", "new_level", "wall_clock"],
        {
            "global_step": {"type": "integer", "minimum": 0},
            "source": {"enum": ["human", "auto", "scripted", "scratch"]},
            "old_level": {"type": "integer", "minimum": 0},
            "new_level": {"type": "integer", "minimum": 0},
            "wall_clock": {"type": "number"},
        },
    ),
    "paused": _server_schema([], {}),
    "resumed": _server_schema([], {}),
    "saved": _server_schema(["path"], {"path": {"type": "string", "minLength": 1}}),
    "error": _server_schema(["message"], {"message": {"type": "string", "minLength": 1}}),
}

# Client messages are intentionally lighter: type is mandatory; run_id and
# seq are included by well-behaved clients but a hand-typed debugging
# session may omit them.
CLIENT_SCHEMAS: dict[str, dict] = {
    "command": {
        "type": "object",
        "required": ["type", "op"],
        "properties": {
            "type": {"const": "command"},
            "op": {"enum": ["easier", "harder", "unchanged", "set"]},
            "value": {"type": ["integer", "null"]},
            **_ENVELOPE,
        },
    },
    "pause": {"type": "object", "required": ["type"], "properties": {"type": {"const": "pause"}, **_ENVELOPE}},
    "play": {"type": "object", "required": ["type"], "properties": {"type": {"const": "play"}, **_ENVELOPE}},
    "save": {"type": "object", "required": ["type"], "properties": {"type": {"const": "save"}, **_ENVELOPE}},
    "subscribe": {"type": "object", "required": ["type"], "properties": {"type": {"const": "subscribe"}, **_ENVELOPE}},
}


def validate_server_message(message: dict) -> None:
    """Raise MalformedMessage unless `message` is a valid server->client message."""
    _validate(message, SERVER_SCHEMAS)


def validate_client_message(message: dict) -> None:
    """Raise MalformedMessage unless `message` is a valid client->server message."""
    _validate(message, CLIENT_SCHEMAS)


def _validate(message, schemas: dict[str, dict]) -> None:
    if not isinstance(message, dict):
        raise MalformedMessage("message must be a JSON object")
    msg_type = message.get("type")
    if not isinstance(msg_type, str):
        raise MalformedMessage("message missing string 'type'")
    schema = schemas.get(msg_type)
    if schema is None:
        # Unknown types are the receiver's business (ignored), not invalid.
        return
    try:
        jsonschema.validate(message, schema)
    except jsonschema.ValidationError as exc:
        raise MalformedMessage(f"invalid {msg_type} message: {exc.message}") from exc


def encode(message: dict) -> bytes:
    return (json.dumps(message) + "\n").encode("utf-8")


def decode_line(line: bytes | str) -> dict:
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedMessage(f"line is not JSON: {exc}") from exc
    if not isinstance(message, dict):
        raise MalformedMessage("message must be a JSON object")
    return message
