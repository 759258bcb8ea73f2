import gzip
import json
from pathlib import Path
from typing import Type, TypeVar

import structlog
from pydantic import BaseModel, ValidationError

from mubkit.errors import InputFileError

logger = structlog.get_logger()

M = TypeVar("M", bound=BaseModel)

GZIP_MAGIC = b"\x1f\x8b"


class FileStore:
    """JSON files for the payload models; gzip detected on read, chosen by suffix on write."""

    def read_bytes(self, path: Path) -> bytes:
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise InputFileError(f"cannot read {path}: {e.strerror or e}") from e
        if data[:2] == GZIP_MAGIC:
            try:
                data = gzip.decompress(data)
            except (OSError, EOFError) as e:
                raise InputFileError(f"{path} is not a valid gzip file: {e}") from e
        return data

    def read_json(self, path: Path):
        try:
            return json.loads(self.read_bytes(path).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise InputFileError(f"{path} is not valid JSON: {e}") from e

    def read(self, path: Path, model: Type[M]) -> M:
        obj = self.read_json(path)
        try:
            result = model.model_validate(obj)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first["loc"]) or "<root>"
            raise InputFileError(f"{path}: {where}: {first['msg']}") from e
        logger.debug("Read file", path=str(path), model=model.__name__)
        return result

    def dumps(self, payload: BaseModel) -> bytes:
        return (payload.model_dump_json(indent=2) + "\n").encode("utf-8")

    def write(self, path: Path, payload: BaseModel):
        path = Path(path)
        data = self.dumps(payload)
        if path.suffix == ".gz":
            # mtime=0 keeps the bytes identical across runs
            data = gzip.compress(data, mtime=0)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        logger.info("Wrote file", path=str(path), bytes=len(data))


store = FileStore()


def get_store() -> FileStore:
    return store
