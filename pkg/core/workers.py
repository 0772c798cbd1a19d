"""Batch workers for Monte Carlo trials.

Trials are independent work units keyed by (seed, trial_index). A batch is a
contiguous block [start, stop) of trial indices; batch boundaries depend only
on ``batch_size``, never on the worker count, and results are merged in batch
order. The merged statistics are therefore identical for any number of
processes.

Usage:
    worker = TrialBatchWorker(partial(run_batch, setup), 0, 500)
    worker.run()
    if worker.error is None:
        accumulators = worker.result
"""

import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, Optional, Union

from tqdm import tqdm

from core.exceptions import ConfigError
from utils.error_handler import safe_call
from utils.logger import get_logger

try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False

logger = get_logger(__name__)

ProgressCallback = Callable[[int, int, str], None]


class BaseWorker:
    """Structured run()/do_work() pattern with captured errors.

    Subclasses override ``do_work()``. ``run()`` stores the return value in
    ``result`` or the exception in ``error``; ``emit_progress`` forwards to
    the optional ``on_progress(current, total, message)`` callback.

    Examples:
        >>> class Square(BaseWorker):
        ...     def __init__(self, x):
        ...         super().__init__()
        ...         self.x = x
        ...     def do_work(self):
        ...         return self.x ** 2
        >>> w = Square(3); w.run(); w.result
        9
    """

    def __init__(self, on_progress: Optional[ProgressCallback] = None):
        self.on_progress = on_progress
        self.result: Any = None
        self.error: Optional[BaseException] = None

    def run(self):
        """Execute ``do_work()``; subclasses should not override this."""
        try:
            self.result = self.do_work()
        except Exception as e:
            self.error = e
            logger.error(f"❌ {type(self).__name__} failed: {e}")

    def do_work(self) -> Any:
        raise NotImplementedError("Subclasses must implement do_work()")

    def emit_progress(self, current: int, total: int, message: str = ""):
        if self.on_progress is not None:
            self.on_progress(current, total, message)


class TrialBatchWorker(BaseWorker):
    """Runs ``task(start, stop)`` for one block of trial indices."""

    def __init__(self, task: Callable[[int, int], Any], start: int, stop: int,
                 on_progress: Optional[ProgressCallback] = None):
        super().__init__(on_progress)
        if not 0 <= start < stop:
            raise ValueError(f"Empty or negative trial block [{start}, {stop})")
        self.task = task
        self.start = start
        self.stop = stop

    def do_work(self) -> Any:
        result = self.task(self.start, self.stop)
        self.emit_progress(self.stop - self.start, self.stop - self.start,
                           f"trials {self.start}..{self.stop - 1}")
        return result


def _run_block(
    task: Callable[[int, int], Any],
    start: int,
    stop: int,
    on_progress: Optional[ProgressCallback] = None,
) -> tuple[int, Any]:
    worker = TrialBatchWorker(task, start, stop, on_progress=on_progress)
    worker.run()
    if worker.error is not None:
        raise worker.error
    return start, worker.result


def resolve_worker_count(setting: Union[int, str, None]) -> int:
    """
    Number of worker processes for a ``workers`` setting.

    "auto" means the physical core count (psutil), falling back to
    ``os.cpu_count()`` when psutil is missing.
    """
    if setting is None or setting == "auto":
        cores = None
        if PSUTIL_AVAILABLE:
            cores = safe_call(psutil.cpu_count, logical=False, operation_name="counting physical cores")
        cores = cores or os.cpu_count() or 1
        logger.debug(f"💻 Auto worker count: {cores}")
        return max(1, cores)
    try:
        count = int(setting)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"workers must be 'auto' or a positive integer, got {setting!r}") from e
    if count < 1:
        raise ConfigError(f"workers must be positive, got {count}")
    return count


def batch_bounds(total: int, batch_size: int) -> list[tuple[int, int]]:
    """[start, stop) blocks covering range(total)."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    return [(start, min(start + batch_size, total)) for start in range(0, total, batch_size)]


def run_batches(
    task: Callable[[int, int], Any],
    total: int,
    batch_size: int,
    workers: Union[int, str, None] = 1,
    progress: bool = False,
    description: str = "trials",
) -> list[Any]:
    """
    Run ``task`` over every block and return the results in block order.

    Args:
        task: Picklable callable (start, stop) -> result.
        total: Number of trials.
        batch_size: Trials per block.
        workers: Process count or "auto"; 1 runs in-process.
        progress: Show a tqdm bar (hidden automatically off a TTY).
        description: Progress bar label.

    Raises:
        Exception: the first failure of any block, after logging it.
    """
    bounds = batch_bounds(total, batch_size)
    count = min(resolve_worker_count(workers), len(bounds)) if bounds else 1
    results: dict[int, Any] = {}

    with tqdm(total=total, desc=description, unit="trial",
              disable=None if progress else True, leave=False) as bar:
        if count <= 1:
            def advance(done: int, size: int, message: str):
                bar.update(done)
                bar.set_postfix_str(message, refresh=False)

            for start, stop in bounds:
                _, results[start] = _run_block(task, start, stop, on_progress=advance)
        else:
            logger.debug(f"🔀 {len(bounds)} batches over {count} processes")
            with ProcessPoolExecutor(max_workers=count) as pool:
                futures = {pool.submit(_run_block, task, start, stop): (start, stop)
                           for start, stop in bounds}
                for future in as_completed(futures):
                    start, stop = futures[future]
                    try:
                        _, results[start] = future.result()
                    except Exception as e:
                        logger.error(f"❌ Batch [{start}, {stop}) failed: {e}")
                        raise
                    # callbacks do not cross the process boundary
                    bar.update(stop - start)

    return [results[start] for start, _ in bounds]
