import os
from concurrent.futures import ThreadPoolExecutor

_override = None


def set_threads(n):
    """Cap worker threads for solver loops and torch (``None`` restores the env default)."""
    global _override
    _override = None if n is None else max(1, int(n))
    try:
        import torch

        torch.set_num_threads(get_threads())
    except ImportError:  # pragma: no cover
        pass


def get_threads() -> int:
    if _override is not None:
        return _override
    env = os.environ.get("TTTK_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def pmap(fn, items):
    """Ordered map, threaded when more than one worker is allowed."""
    items = list(items)
    n = min(get_threads(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
