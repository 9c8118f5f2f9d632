"""Per-step episode trace files (CSV: t, state_hash, action, reward, done)."""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

from .env import ACTIONS, EnvState

FIELDS = ("t", "state_hash", "action", "reward", "done")


def state_hash(s: EnvState) -> str:
    """Stable 16-hex-digit digest of a state (same across processes)."""
    lay = s.layout
    parts = (lay.size, sorted(lay.walls), lay.goal, lay.door_pos, lay.box_pos, s[1:])
    return hashlib.blake2b(repr(parts).encode(), digest_size=8).hexdigest()


class EpisodeTrace:
    """Collects rows while an episode runs; ``write`` dumps them as CSV."""

    def __init__(self):
        self.rows: list = []

    def record(self, t: int, s: EnvState, action: int, reward: float, done: bool):
        self.rows.append({"t": t, "state_hash": state_hash(s), "action": ACTIONS[action],
                          "reward": float(reward), "done": bool(done)})

    def write(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=FIELDS)
            w.writeheader()
            w.writerows(self.rows)
        return path


def read_episode_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["t"] = int(r["t"])
        r["reward"] = float(r["reward"])
        r["done"] = r["done"] == "True"
    return rows
