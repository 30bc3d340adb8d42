"""Model registry: a directory of model files plus an append-only manifest.

The manifest is one JSON record per line: {"event": "add"|"promote"|
"rollback", "version": n, ...}. Replaying it reconstructs the registry
after a crash; there is exactly one active version whenever the registry
is non-empty.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from ..errors import UnknownVersion
from ..nn import Model, load_model, save_model

MANIFEST = "manifest.jsonl"


@dataclass
class RegistryEntry:
    version: int
    file: str
    sha256: str
    active: bool


class ModelRegistry:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._versions: dict[int, dict] = {}
        self._active: int | None = None
        self._replay()

    # -- manifest ------------------------------------------------------------

    @property
    def _manifest_path(self) -> Path:
        return self.root / MANIFEST

    def _replay(self) -> None:
        if not self._manifest_path.exists():
            return
        for line in self._manifest_path.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["event"] == "add":
                self._versions[rec["version"]] = rec
            elif rec["event"] in ("promote", "rollback"):
                self._active = rec["version"]
        self.validate()

    def _append(self, rec: dict) -> None:
        with open(self._manifest_path, "a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def validate(self) -> None:
        """Crash-recovery invariant: non-empty registry has exactly one active version."""
        if self._versions:
            if self._active is None or self._active not in self._versions:
                raise UnknownVersion("manifest replay left no valid active version")
        elif self._active is not None:
            raise UnknownVersion("manifest names an active version that was never added")

    # -- operations ------------------------------------------------------------

    def add(self, model: Model, activate: bool = False) -> int:
        version = max(self._versions, default=0) + 1
        fname = f"v{version:04d}.lcm"
        save_model(model, self.root / fname)
        digest = hashlib.sha256((self.root / fname).read_bytes()).hexdigest()
        rec = {"event": "add", "version": version, "file": fname, "sha256": digest}
        self._append(rec)
        self._versions[version] = rec
        if activate or self._active is None:
            self.promote(version)
        return version

    def promote(self, version: int) -> None:
        if version not in self._versions:
            raise UnknownVersion(f"no model version {version}")
        self._append({"event": "promote", "version": version})
        self._active = version

    def rollback(self, version: int) -> None:
        if version not in self._versions:
            raise UnknownVersion(f"no model version {version}")
        self._append({"event": "rollback", "version": version})
        self._active = version

    def list_models(self) -> list[RegistryEntry]:
        return [
            RegistryEntry(
                version=v,
                file=rec["file"],
                sha256=rec["sha256"],
                active=v == self._active,
            )
            for v, rec in sorted(self._versions.items())
        ]

    def active_version(self) -> int | None:
        return self._active

    def load(self, version: int | None = None) -> Model:
        v = self._active if version is None else version
        if v is None or v not in self._versions:
            raise UnknownVersion(f"no model version {v}")
        return load_model(self.root / self._versions[v]["file"])

    def __len__(self) -> int:
        return len(self._versions)
