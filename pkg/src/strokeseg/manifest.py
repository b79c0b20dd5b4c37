"""Run manifests: enough recorded state to replay any CLI command."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

__all__ = ["RunManifest", "sha256_file", "write_manifest", "read_manifest"]


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """What a command ran with and what it produced.

    `argv` is the exact argument vector (minus the program name), which is
    what `rerun` replays; `timings` is informational and excluded from any
    reproducibility comparison.
    """

    command: str
    argv: list
    config: dict = field(default_factory=dict)
    input_checksums: dict = field(default_factory=dict)
    seed: int = 0
    outputs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def write_manifest(path, manifest: RunManifest) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def read_manifest(path) -> RunManifest:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunManifest(**data)
