"""Run manifests: enough resolved state to replay a run exactly.

A manifest is written (status "running") before a subcommand does any
work and finalized (status "ok"/"failed", wall-clock) afterwards, next
to the run's outputs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .seeding import named_seeds


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    status: str = "running"
    started_unix: float = 0.0
    wall_clock_seconds: float | None = None

    def __post_init__(self):
        self.sub_seeds = named_seeds(self.seed)

    def path(self, out_dir: str | Path) -> Path:
        return Path(out_dir) / f"{self.subcommand}.manifest.json"

    def write(self, out_dir: str | Path) -> Path:
        self.started_unix = self.started_unix or time.time()
        target = self.path(out_dir)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(self.to_json(), encoding="utf-8")
        return target

    def finalize(self, out_dir: str | Path, status: str = "ok") -> Path:
        self.status = status
        self.wall_clock_seconds = round(time.time() - self.started_unix, 6)
        return self.write(out_dir)

    def to_json(self) -> str:
        payload = {
            "subcommand": self.subcommand,
            "version": self.version,
            "seed": self.seed,
            "sub_seeds": self.sub_seeds,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "status": self.status,
            "started_unix": self.started_unix,
            "wall_clock_seconds": self.wall_clock_seconds,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def replay_key(self) -> str:
        """The replay-relevant manifest content (timing and status excluded)."""
        payload = {
            "subcommand": self.subcommand,
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
        }
        return json.dumps(payload, sort_keys=True)
