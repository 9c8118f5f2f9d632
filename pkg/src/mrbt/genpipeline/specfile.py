"""YAML serialisation of template inputs (the MRBT spec file).

Layout::

    task_space: lockedroom
    subtasks:
      - name: Pick up key
        psi: key_pos[lockedroom_color] == -1
        phi: front_pos == key_pos[lockedroom_color]
        mask_nav: [left, right, forward]
        mask_interact: [left, right, pickup]
    rewards: {reward_on_true: 1.0, ...}
    provenance: {generator: scripted, iterations: 2, verified: true}
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..template import RewardConfig, SubtaskSpec


@dataclass
class SubtaskEntry:
    name: str
    psi: str
    phi: str
    mask_nav: list
    mask_interact: list


@dataclass
class MrbtSpecFile:
    task_space: str
    subtasks: list  # of SubtaskEntry
    rewards: RewardConfig = field(default_factory=RewardConfig)
    provenance: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.subtasks)

    def to_subtasks(self, space) -> list:
        """Parse every entry against the task space's schema."""
        out = []
        for e in self.subtasks:
            out.append(SubtaskSpec(e.name, space.parse(e.psi), space.parse(e.phi),
                                   space.schema.mask_of(e.mask_nav), space.schema.mask_of(e.mask_interact)))
        return out

    @classmethod
    def from_subtasks(cls, space_name, subtasks, schema, rewards=None, provenance=None) -> "MrbtSpecFile":
        entries = [SubtaskEntry(st.name, st.psi.text, st.phi.text, schema.mask_names(st.mask_nav),
                                schema.mask_names(st.mask_interact)) for st in subtasks]
        return cls(space_name, entries, rewards or RewardConfig(), dict(provenance or {}))

    def to_dict(self) -> dict:
        return {
            "task_space": self.task_space,
            "subtasks": [asdict(e) for e in self.subtasks],
            "rewards": asdict(self.rewards),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MrbtSpecFile":
        try:
            subs = [SubtaskEntry(str(e["name"]), str(e["psi"]), str(e["phi"]), list(e["mask_nav"]),
                                 list(e["mask_interact"])) for e in d["subtasks"]]
            return cls(str(d["task_space"]), subs, RewardConfig(**(d.get("rewards") or {})),
                       dict(d.get("provenance") or {}))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed spec file: {exc}") from exc


def write_spec(path, spec: MrbtSpecFile) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(spec.to_dict(), sort_keys=False, allow_unicode=True))
    return path


def read_spec(path) -> MrbtSpecFile:
    d = yaml.safe_load(Path(path).read_text())
    if not isinstance(d, dict):
        raise ValueError(f"{path}: not a spec file")
    return MrbtSpecFile.from_dict(d)


def reference_spec(space) -> MrbtSpecFile:
    """Spec file holding the built-in reference formulas of a task space."""
    from ..gridworld.spaces import REFERENCE_SUBTASKS

    entries = [SubtaskEntry(d["name"], d["psi"], d["phi"], list(d["nav"]), list(d["interact"]))
               for d in REFERENCE_SUBTASKS[space.name]]
    return MrbtSpecFile(space.name, entries, provenance={"generator": "reference"})
