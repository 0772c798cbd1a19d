"""Error handling utilities for the GHZ fidelity toolkit.

Domain errors (``GhzFidelityError``: bad configs, inadmissible noise,
invalid states) are expected input problems and are logged as one line.
Anything else is a bug or an environment problem (disk full, broken worker)
and is logged with its traceback.

Usage:
    # Log and re-raise (default)
    with safe_operation("Writing sweep CSV"):
        emit_csv(rows, path)

    # Optional work: log but keep going
    with safe_operation("Writing run manifest", silent=True):
        write_manifest(path, config, parameter, values, elapsed)

    # Collect failures over a batch of oracles instead of stopping at the first
    errors = ErrorAccumulator()
    for name, check in checks:
        with errors.catch(name):
            check()
"""

from contextlib import contextmanager
from typing import Any, Callable, Optional

from core.exceptions import GhzFidelityError
from utils.logger import get_logger

logger = get_logger(__name__)


def describe_error(error: BaseException) -> str:
    """``Type: message``, the one-line form used in every log entry."""
    return f"{type(error).__name__}: {error}"


def _log(error: BaseException, message: str, level: str):
    log_func = getattr(logger, level, logger.warning)
    # domain errors carry their own explanation; a traceback adds nothing
    log_func(message, exc_info=not isinstance(error, GhzFidelityError))


@contextmanager
def safe_operation(
    operation_name: str,
    silent: bool = False,
    log_level: str = "warning",
):
    """Context manager for operations with automatic error logging.

    Args:
        operation_name: Human-readable description of the operation
        silent: If True, the exception is logged and swallowed
        log_level: "debug", "info", "warning" or "error"

    Raises:
        Exception: the caught exception, unless silent
    """
    try:
        yield
    except Exception as e:
        _log(e, f"⚠️ Error during {operation_name}: {describe_error(e)}", log_level)
        if not silent:
            raise


def safe_call(
    func: Callable,
    *args,
    operation_name: Optional[str] = None,
    silent: bool = True,
    default_return: Any = None,
    **kwargs
) -> Any:
    """Call ``func(*args, **kwargs)``; on failure log and return ``default_return``.

    Examples:
        >>> cores = safe_call(psutil.cpu_count, logical=False, default_return=None)
    """
    op_name = operation_name or f"calling {func.__name__}"
    try:
        return func(*args, **kwargs)
    except Exception as e:
        _log(e, f"⚠️ Error during {op_name}: {describe_error(e)}", "warning")
        if not silent:
            raise
        return default_return


def log_exception(
    exception: Exception,
    context: str = "",
    level: str = "error",
    include_traceback: Optional[bool] = None,
):
    """Log an exception the caller has already handled.

    Args:
        exception: The exception to log
        context: Prefix naming what was being done
        level: Logger method name
        include_traceback: Force the traceback on or off; by default only
            non-domain errors get one
    """
    prefix = f"{context}: " if context else ""
    message = f"❌ {prefix}{describe_error(exception)}"
    if include_traceback is None:
        _log(exception, message, level)
    else:
        getattr(logger, level, logger.error)(message, exc_info=include_traceback)


class ErrorAccumulator:
    """Collects failures of a batch of named operations.

    The verify suite runs every oracle inside ``catch`` so one broken check
    never hides the others.

    Examples:
        >>> errors = ErrorAccumulator()
        >>> with errors.catch("twirl(3)"):
        ...     check_twirl(3)
        >>> errors.count()
        0
    """

    def __init__(self):
        self.errors: list[tuple[str, Exception]] = []

    @contextmanager
    def catch(self, operation_name: str):
        try:
            yield
        except Exception as e:
            self.errors.append((operation_name, e))
            logger.debug(f"Error caught during {operation_name}: {e}")

    def has_errors(self) -> bool:
        return bool(self.errors)

    def count(self) -> int:
        return len(self.errors)

    def domain_errors(self) -> list[tuple[str, GhzFidelityError]]:
        """Only the failures raised as toolkit domain errors."""
        return [(name, e) for name, e in self.errors if isinstance(e, GhzFidelityError)]

    def log_all(self, level: str = "warning"):
        if not self.errors:
            return
        log_func = getattr(logger, level, logger.warning)
        log_func(f"Accumulated {len(self.errors)} errors:")
        for operation, error in self.errors:
            log_func(f"  - {operation}: {describe_error(error)}")

    def clear(self):
        self.errors.clear()

    def get_errors(self) -> list[tuple[str, Exception]]:
        """(operation_name, exception) pairs in the order they were caught."""
        return self.errors.copy()
