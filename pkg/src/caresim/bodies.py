"""Body description files: the on-disk schema for articulated bodies.

A body file is JSON with the following layout (all lengths in meters,
angles in radians, torques in N*m, speeds in rad/s or m/s):

    {
      "name": "jaco",
      "links": [
        {
          "name": "shoulder",          # unique link name
          "parent": -1,                 # index into links, -1 = root
          "xyz": [0, 0, 0.15],          # fixed offset from parent frame
          "rpy": [0, 0, 0],             # fixed rotation (roll-pitch-yaw, ZYX)
          "joint": {                    # omit entirely for a fixed link
            "type": "revolute",         # or "prismatic"
            "axis": [0, 0, 1],
            "limits": [-3.14, 3.14],    # [l_min, l_max]
            "tau_max": 30.0,
            "v_max": 1.0
          },
          "capsule": {"a": [0,0,0], "b": [0,0,0.2], "r": 0.05},   # optional
          "mass": 1.2,                  # optional, default 0
          "com": [0, 0, 0.1]            # optional, default origin
        },
        ...
      ],
      "meta": { ... }                   # consumer-specific (robots module)
    }

Links must appear parent-before-child. The same schema carries the four
robot models shipped in caresim/data/robots/.
"""

from __future__ import annotations

import json
from pathlib import Path

from .geom import Capsule, quat_from_euler
from .kinematics import ArticulatedBody, JointSpec

DATA_DIR = Path(__file__).parent / "data"


class BodyLoadError(Exception):
    """Malformed body description or anthropometry file."""


def body_from_dict(doc: dict) -> tuple[ArticulatedBody, dict]:
    """Build an ArticulatedBody from a parsed description; returns (body, meta)."""
    try:
        body = ArticulatedBody(doc.get("name", "body"))
        for entry in doc["links"]:
            local = (quat_from_euler(*entry.get("rpy", (0.0, 0.0, 0.0))),
                     tuple(entry.get("xyz", (0.0, 0.0, 0.0))))
            joint = None
            if "joint" in entry:
                j = entry["joint"]
                joint = JointSpec(
                    name=entry["name"],
                    axis=tuple(j["axis"]),
                    jtype=j.get("type", "revolute"),
                    l_min=float(j["limits"][0]),
                    l_max=float(j["limits"][1]),
                    tau_max=float(j.get("tau_max", 50.0)),
                    v_max=float(j.get("v_max", 1.0)),
                )
            capsule = None
            if "capsule" in entry:
                c = entry["capsule"]
                capsule = Capsule(tuple(c["a"]), tuple(c["b"]), float(c["r"]))
            body.add_link(entry["name"], int(entry["parent"]), local,
                          joint=joint, capsule=capsule,
                          mass=float(entry.get("mass", 0.0)),
                          com=tuple(entry.get("com", (0.0, 0.0, 0.0))))
        return body, doc.get("meta", {})
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise BodyLoadError(f"bad body description: {exc}") from exc


def load_body_file(path: str | Path) -> tuple[ArticulatedBody, dict]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BodyLoadError(f"cannot read {path}: {exc}") from exc
    return body_from_dict(doc)
