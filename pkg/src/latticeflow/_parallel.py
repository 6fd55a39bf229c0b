import os
from concurrent.futures import ThreadPoolExecutor


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("LATTICEFLOW_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Ordered map; threads only when LATTICEFLOW_THREADS > 1."""
    items = list(items)
    n = max_threads()
    if n == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
