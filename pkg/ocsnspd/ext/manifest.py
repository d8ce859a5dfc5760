from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..materials import MaterialLibrary
from ..results import SweepResult

logger = logging.getLogger(__name__)

def sha256_of(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()

def atomic_write_bytes(path: str | Path, data: bytes):
    """Writes a file through a temporary sibling and a rename, so readers never see a partial file."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(handle, 'wb') as f:
            f.write(data)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise

def atomic_write_text(path: str | Path, text: str):
    atomic_write_bytes(path, text.encode('utf-8'))

@dataclass
class RunManifest:
    """Provenance of one output file.

    **Attributes:**

    * command :class:`str`
    * config :class:`dict`
        The resolved options of the run
    * materials :class:`dict`
        Path and SHA-256 of every material file read
    * seed :class:`int`
    * version :class:`str`
    * timestamp :class:`str`
        UTC, ISO 8601
    * output :class:`dict`
        Name and SHA-256 of the file this manifest describes
    """

    command: str
    config: dict
    materials: dict = field(default_factory=dict)
    seed: int = None
    version: str = None
    timestamp: str = None
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.version is None:
            from .. import __version__
            self.version = __version__
        if self.timestamp is None:
            self.timestamp = datetime.now(timezone.utc).isoformat()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + '\n'

    @classmethod
    def from_json(cls, path: str | Path) -> RunManifest:
        return cls(**json.loads(Path(path).read_text()))

    def verify(self, directory: str | Path) -> bool:
        """Checks that the described output still hashes to the recorded value."""

        target = Path(directory) / self.output['name']
        return target.exists() and sha256_of(target) == self.output['sha256']

class OutputWriter:
    """Writes the files of one command into an output directory, each with its own manifest.

    :param directory: the output directory, created if missing
    :param command: the command name recorded in manifests
    :param config: the resolved configuration snapshot
    :param seed: the seed of the run
    :param library: the material library whose provenance is recorded

    **Attributes:**

    * written :class:`list[Path]`
        Every data file written so far
    """

    def __init__(self, directory: str | Path, command: str, config: dict, seed: int = None, library: MaterialLibrary = None):
        self.directory = Path(directory)
        self.command = command
        self.config = config
        self.seed = seed
        self.library = library
        self.written: list[Path] = []

    def _manifest(self, path: Path):
        materials = self.library.provenance() if self.library else {}
        manifest = RunManifest(self.command, self.config, materials, self.seed,
                               output={'name': path.name, 'sha256': sha256_of(path)})
        atomic_write_text(path.with_name(path.name + '.manifest.json'), manifest.to_json())

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.directory / name
        atomic_write_bytes(path, data)
        self._manifest(path)
        self.written.append(path)
        logger.info('wrote %s', path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode('utf-8'))

    def write_csv(self, name: str, result: SweepResult) -> Path:
        return self.write_text(name, result.to_csv_text())
