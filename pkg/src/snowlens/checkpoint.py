"""Checkpoints: a torch parameter blob plus a JSON sidecar manifest."""
import json
from dataclasses import dataclass, field
from pathlib import Path

from ._torchutil import state_from_bytes, state_to_bytes


@dataclass
class Checkpoint:
    epoch: int
    blob: bytes
    manifest: dict
    path: Path = field(default=None, compare=False)

    @classmethod
    def from_state(cls, epoch, state, manifest):
        return cls(epoch, state_to_bytes(state), manifest)

    @property
    def state(self):
        return state_from_bytes(self.blob)

    def save(self, directory, stem=None):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or f"epoch{self.epoch:04d}"
        path = directory / f"{stem}.pt"
        path.write_bytes(self.blob)
        with open(directory / f"{stem}.json", "w") as f:
            json.dump(self.manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        self.path = path
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        if path.suffix == ".json":
            path = path.with_suffix(".pt")
        sidecar = path.with_suffix(".json")
        with open(sidecar) as f:
            manifest = json.load(f)
        return cls(int(manifest["epoch"]), path.read_bytes(), manifest, path)
