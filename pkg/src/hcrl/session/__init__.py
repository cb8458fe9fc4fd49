"""Run orchestration: configuration, persistence, wire protocol, CLI."""
