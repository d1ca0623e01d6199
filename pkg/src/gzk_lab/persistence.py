"""Output directories, schema-tagged CSV tables, JSON documents and run manifests."""

import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, List, Literal, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import BaseModel

from . import __version__
from .errors import ConfigError

logger = logging.getLogger(__name__)

SCHEMA_PREFIX = "gzk-lab"
SCHEMA_VERSION = "v1"
SCHEMA_MARKER = "# schema: "
FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"

PathLike = Union[str, Path]


def schema_tag(kind: str) -> str:
    return f"{SCHEMA_PREFIX}/{kind}/{SCHEMA_VERSION}"


def prepare_output_dir(path: PathLike, force: bool = False) -> Path:
    """
    Create the run directory.

    Raises:
        ConfigError: If it already holds files and force is not set
    """
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise ConfigError(f"output directory {path} exists and is not empty; pass --force")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_table(
    table: pd.DataFrame, path: PathLike, kind: str, footer: Sequence[str] = ()
) -> Path:
    """CSV with a schema line first and optional '# ...' summary lines last."""
    path = Path(path)
    with open(path, "w", newline="") as f:
        f.write(f"{SCHEMA_MARKER}{schema_tag(kind)}\n")
        table.to_csv(f, index=False, float_format=FLOAT_FORMAT)
        for line in footer:
            f.write(f"# {line}\n")
    return path


def read_table(path: PathLike) -> Tuple[str, pd.DataFrame]:
    """
    Returns:
        Tuple of (schema tag, table without comment lines)

    Raises:
        ConfigError: If the first line is not a schema tag
    """
    path = Path(path)
    with open(path) as f:
        first = f.readline().rstrip("\n")
    if not first.startswith(SCHEMA_MARKER):
        raise ConfigError(f"{path}: missing schema line")
    return first[len(SCHEMA_MARKER) :], pd.read_csv(path, comment="#")


def table_footer(path: PathLike) -> List[str]:
    """Trailing '# ...' lines of a table, without the marker."""
    with open(path) as f:
        lines = f.read().splitlines()
    return [line[2:] for line in lines[1:] if line.startswith("# ")]


def write_json(document: Any, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(document, indent=2, sort_keys=True, default=str))
    return path


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class RunManifest(BaseModel):
    """Record of one command run, written last and atomically."""

    config_hash: str
    code_version: str = __version__
    command: str
    started_at: str
    finished_at: Optional[str] = None
    files: List[str] = []
    status: Literal["running", "complete", "failed", "blow_up"] = "running"
    notes: List[str] = []


class RunRecorder:
    """Collects the files a command writes under its output directory."""

    def __init__(self, out_dir: Path, command: str, config_hash: str):
        self.out_dir = out_dir
        self.manifest = RunManifest(
            config_hash=config_hash,
            command=command,
            started_at=datetime.now(timezone.utc).isoformat(),
        )

    def add(self, *paths: PathLike) -> None:
        for path in paths:
            name = Path(path).resolve().relative_to(self.out_dir.resolve()).as_posix()
            if name not in self.manifest.files:
                self.manifest.files.append(name)

    def note(self, message: str) -> None:
        self.manifest.notes.append(message)

    def finish(self, status: str) -> Path:
        """Write manifest.json atomically; the manifest lists itself last."""
        self.manifest.status = status  # type: ignore[assignment]
        self.manifest.finished_at = datetime.now(timezone.utc).isoformat()
        self.manifest.files.append(MANIFEST_NAME)
        path = self.out_dir / MANIFEST_NAME
        _atomic_write(
            path, json.dumps(self.manifest.model_dump(), indent=2, sort_keys=True, default=str)
        )
        logger.info(f"manifest {path}: status {status}, {len(self.manifest.files)} files")
        return path


def load_manifest(path: PathLike) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text())
