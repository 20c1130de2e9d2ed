import logging
import multiprocessing as mp
import os
import re
import tempfile
from argparse import ArgumentParser
from contextlib import contextmanager
from hashlib import sha256
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Type, TypeVar

from pydantic import BaseModel

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)
T = TypeVar("T")
R = TypeVar("R")


@contextmanager
def atomic_writer(path: Path, mode: str = "w"):
    """Write to a temp file next to `path` and rename it into place on success.

    An exception inside the block leaves any previous `path` untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        encoding = None if "b" in mode else "utf-8"
        newline = None if "b" in mode else "\n"
        with os.fdopen(fd, mode, encoding=encoding, newline=newline) as handle:
            yield handle
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path: Path, text: str) -> None:
    with atomic_writer(path) as handle:
        handle.write(text)


def write_jsonl(path: Path, records: Iterable[BaseModel]) -> int:
    count = 0
    with atomic_writer(path) as handle:
        for record in records:
            handle.write(record.model_dump_json(exclude_none=True))
            handle.write("\n")
            count += 1
    return count


def read_jsonl(path: Path, model: Type[M]) -> Iterator[M]:
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield model.model_validate_json(line)
            except Exception as e:
                raise ValueError(f"{path}:{line_number}: {e}") from e


_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def safe_filename(unit_id: str, suffix: str = ".json") -> str:
    """Readable, collision-free file name for a unit id (ids contain '/' and '::')."""
    digest = sha256(unit_id.encode("utf-8")).hexdigest()[:10]
    stem = _UNSAFE.sub("_", unit_id).strip("_")[-80:]
    return f"{stem}-{digest}{suffix}"


def log_progress(items: Iterable[T], every: int, label: str) -> Iterator[T]:
    count = 0
    for item in items:
        yield item
        count += 1
        if count % every == 0:
            logger.info("%s: %d units", label, count)
    logger.info("%s: %d units done", label, count)


_worker_fn: Optional[Callable] = None


def _install_worker(fn: Callable) -> None:
    global _worker_fn
    _worker_fn = fn


def _call_worker(item):
    return _worker_fn(item)


def parallel_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    jobs: int = 1,
    chunksize: int = 8,
) -> Iterator[R]:
    """Order-preserving map over a worker pool; jobs == 1 runs inline.

    `fn` must be picklable (a module-level function or a functools.partial
    of one). It is sent to each worker once, through the pool initializer,
    so large bound arguments such as a BPE model are not re-pickled per chunk.
    """
    if jobs <= 1:
        for item in items:
            yield fn(item)
        return
    with mp.get_context("spawn").Pool(
        processes=jobs, initializer=_install_worker, initargs=(fn,)
    ) as pool:
        yield from pool.imap(_call_worker, items, chunksize=chunksize)


def add_default_args(parser: ArgumentParser):
    parser.add_argument(
        "--config",
        type=Path,
        default=os.getenv("TOKOMPILER_CONFIG"),
        help="YAML settings file (see static/data/config.yaml)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=os.getenv("TOKOMPILER_SEED"),
        help="Run seed; overrides TOKOMPILER_SEED",
    )
    parser.add_argument(
        "--lang",
        action="append",
        choices=["c", "cpp", "fortran"],
        help="Restrict to a language (repeatable); default all",
    )
    parser.add_argument("--jobs", type=int, default=1, help="Worker processes")
    parser.add_argument("--strict", action="store_true", help="Exit 1 if any unit fails")
    parser.add_argument("--out", type=Path, help="Output file or directory")
    parser.add_argument(
        "--log-every", type=int, default=1000, help="Progress line every N units"
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Set the logging level",
    )


