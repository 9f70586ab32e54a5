"""Wire-protocol server: drive one environment over NDJSON messages.

One session per connection (TCP) or per process (stdio). Messages are
single-line JSON objects; replies use the canonical encoding (sorted
keys, repr floats), so a given (seed, action stream) yields a
byte-identical reply stream.

Commands:
    {"cmd": "spec"}                          -> {"ok": true, "spec": {...}}
    {"cmd": "reset", "seed": 123}            -> {"ok": true, "t": 0, "obs": [...]}
    {"cmd": "step", "action": [...],
     "human_action": [...] (active mode)}    -> {"ok": true, "t": n, "obs": [...],
                                                 "reward": r, "done": b, "info": {...}}
    {"cmd": "close"}                         -> {"ok": true, "closed": true}

Malformed input or a bad action yields {"ok": false, "error": "..."} and
the session continues. Stepping a finished episode is an error until the
next reset; resetting mid-episode restarts (allowed).

With active_human the obs fields become {"robot": [...], "human": [...]}
and step accepts "human_action".

The optional trace sink records one canonical line per step:
    {"t": n, "obs": [...], "reward": r, "done": b}
which is the conformance surface remote clients are tested against.
"""

from __future__ import annotations

import socketserver
import sys

from ..envs.core import ActionError
from .canon import canon_dumps, canon_loads
from .config import RunConfig


def _obs_payload(obs):
    if isinstance(obs, dict):
        return {"robot": [float(v) for v in obs["robot"]],
                "human": [float(v) for v in obs["human"]]}
    return [float(v) for v in obs]


class Session:
    """Protocol state machine for one connection."""

    def __init__(self, config: RunConfig, trace_sink=None):
        self.config = config
        self.env = config.make_env()
        self.running = False
        self.trace_sink = trace_sink
        self._last_obs = None

    def handle_line(self, line: str) -> str:
        try:
            msg = canon_loads(line)
        except ValueError:
            return canon_dumps({"ok": False, "error": "malformed message"})
        if not isinstance(msg, dict) or "cmd" not in msg:
            return canon_dumps({"ok": False, "error": "missing cmd"})
        cmd = msg["cmd"]
        try:
            if cmd == "spec":
                return canon_dumps({"ok": True, "spec": self.env.describe()})
            if cmd == "reset":
                seed = msg.get("seed", 0)
                if not isinstance(seed, int) or seed < 0:
                    return canon_dumps({"ok": False,
                                        "error": "seed must be a non-negative integer"})
                obs = self.env.reset(seed=seed)
                self.running = True
                self._last_obs = obs
                return canon_dumps({"ok": True, "t": 0,
                                    "obs": _obs_payload(obs)})
            if cmd == "step":
                if not self.running:
                    return canon_dumps({"ok": False,
                                        "error": "no episode running; reset first"})
                if self.env.done:
                    return canon_dumps({"ok": False, "error": "episode finished"})
                action = msg.get("action")
                human_action = msg.get("human_action")
                obs, breakdown, done, info = self.env.step(action, human_action)
                self._last_obs = obs
                reply = {
                    "ok": True,
                    "t": self.env.t,
                    "obs": _obs_payload(obs),
                    "reward": breakdown.r,
                    "done": bool(done),
                    "info": {"success": bool(info.get("success", False)),
                             "r_task": breakdown.r_task,
                             "r_pref": breakdown.r_preference},
                }
                if self.trace_sink is not None:
                    robot_obs = obs["robot"] if isinstance(obs, dict) else obs
                    self.trace_sink.write(canon_dumps(
                        {"t": self.env.t,
                         "obs": [float(v) for v in robot_obs],
                         "reward": breakdown.r,
                         "done": bool(done)}) + "\n")
                return canon_dumps(reply)
            if cmd == "close":
                self.running = False
                return canon_dumps({"ok": True, "closed": True})
            return canon_dumps({"ok": False, "error": f"unknown cmd {cmd!r}"})
        except ActionError as exc:
            return canon_dumps({"ok": False, "error": str(exc)})
        except Exception as exc:  # contract: session survives bad requests
            return canon_dumps({"ok": False,
                                "error": f"{type(exc).__name__}: {exc}"})


def serve_stdio(config: RunConfig, trace_path=None,
                stdin=None, stdout=None) -> None:
    """Blocking stdio session loop; one message per line until EOF."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    sink = open(trace_path, "w") if trace_path else None
    try:
        session = Session(config, trace_sink=sink)
        stdout.write(canon_dumps({"ok": True, "ready": True,
                                  "env": config.env, "robot": config.robot}) + "\n")
        stdout.flush()
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            stdout.write(session.handle_line(line) + "\n")
            stdout.flush()
    finally:
        if sink:
            sink.close()


def serve_tcp(config: RunConfig, port: int, trace_path=None,
              max_sessions: int | None = None) -> None:
    """TCP server: one independent session per connection."""
    served = {"count": 0}

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            sink = open(trace_path, "w") if trace_path else None
            try:
                session = Session(config, trace_sink=sink)
                self.wfile.write(canon_dumps(
                    {"ok": True, "ready": True, "env": config.env,
                     "robot": config.robot}).encode() + b"\n")
                for raw in self.rfile:
                    line = raw.decode("utf-8", errors="replace").strip()
                    if not line:
                        continue
                    self.wfile.write(session.handle_line(line).encode() + b"\n")
            finally:
                if sink:
                    sink.close()
            served["count"] += 1

    with socketserver.ThreadingTCPServer(("127.0.0.1", port), Handler) as srv:
        srv.allow_reuse_address = True
        if max_sessions is None:
            srv.serve_forever()
        else:
            while served["count"] < max_sessions:
                srv.handle_request()
