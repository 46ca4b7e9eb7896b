"""Run directories and their manifests."""

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

from src import __version__
from src.models.run import RunManifest
from src.utils.config import get_settings
from src.utils.serialization import canonical_json, sha256_digest, to_jsonable, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
# flags that change where or how fast a run goes, not what it produces
_NON_INPUT_ARGS = {"handler", "out", "log_level", "jobs"}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_arguments(args: Any) -> dict:
    """Parsed arguments that determine a run's outputs."""
    return {k: to_jsonable(v) for k, v in sorted(vars(args).items()) if k not in _NON_INPUT_ARGS}


class RunDirectory:
    """
    One output directory per invocation.

    The directory name defaults to ``<command>-<digest8>`` where the digest
    covers the command, its arguments, the seed and the hashes of all input
    files. Outputs are registered through ``output`` and hashed by ``finish``;
    the manifest is the only file that carries timestamps.
    """

    def __init__(
        self,
        command: str,
        argv: Sequence[str],
        arguments: dict,
        seed: int,
        inputs: Sequence[Optional[Path]] = (),
        out: Optional[Path] = None,
        config_path: Optional[Path] = None,
    ):
        started = _now()
        hashed = {}
        for path in inputs:
            if path is not None and Path(path).is_file():
                hashed[str(path)] = sha256_digest(Path(path))
        digest = sha256_digest(
            canonical_json({"command": command, "arguments": arguments, "inputs": hashed, "seed": seed})
        )
        self.root = Path(out) if out is not None else get_settings().runs_dir / f"{command}-{digest[:8]}"
        self.root.mkdir(parents=True, exist_ok=True)
        self._outputs: list[str] = []
        self.manifest = RunManifest(
            command=command,
            argv=list(argv),
            config_path=str(config_path) if config_path is not None else None,
            inputs=hashed,
            inputs_digest=digest,
            seed=seed,
            tool_version=__version__,
            started_at=started,
        )
        logger.info(f"Run directory {self.root}")

    def output(self, name: str) -> Path:
        if name == MANIFEST_NAME:
            raise ValueError(f"{MANIFEST_NAME} is reserved")
        if name not in self._outputs:
            self._outputs.append(name)
        return self.root / name

    def finish(self) -> Path:
        self.manifest.finished_at = _now()
        self.manifest.outputs = {
            name: sha256_digest(self.root / name)
            for name in self._outputs
            if (self.root / name).is_file()
        }
        return write_json(self.root / MANIFEST_NAME, self.manifest)
