import hashlib
import logging
from pathlib import Path
from typing import Iterable

logger = logging.getLogger(__name__)

# Sources whose behaviour ends up in a report.
ENGINE_FILES = (
    "app/core/canonicalize.py",
    "app/engine/builder.py",
    "app/engine/elliptic.py",
    "app/engine/hilbert.py",
    "app/engine/report.py",
    "app/engine/spectral.py",
    "app/engine/suites.py",
    "app/engine/susy.py",
    "app/engine/vertex.py",
)

UNKNOWN_VERSION = "0" * 16


def fingerprint_sources(base_dir: Path, files: Iterable[str] = ENGINE_FILES) -> str:
    """
    16-hex digest over (path, sha256(content)) of every engine source.
    A missing file contributes its path with an empty digest.
    """
    digest = hashlib.sha256()
    for relative in sorted(files):
        path = base_dir / relative
        if path.is_file():
            content_hash = hashlib.sha256(path.read_bytes()).hexdigest()
        else:
            logger.warning("engine file not found", extra={"fields": {"path": str(path)}})
            content_hash = ""
        digest.update(f"{relative}:{content_hash}\n".encode())
    return digest.hexdigest()[:16]


BACKEND_ROOT = Path(__file__).resolve().parents[2]

try:
    ENGINE_VERSION = fingerprint_sources(BACKEND_ROOT)
except OSError as e:
    logger.error("could not fingerprint engine sources", extra={"fields": {"error": str(e)}})
    ENGINE_VERSION = UNKNOWN_VERSION
