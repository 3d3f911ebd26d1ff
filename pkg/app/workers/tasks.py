import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, TypeVar

from tqdm import tqdm

from app.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(
    func: Callable[[T], R],
    items: Sequence[T],
    max_workers: Optional[int] = None,
    desc: Optional[str] = None,
    show_progress: bool = False,
) -> List[R]:
    """
    Applies `func` to every item, concurrently when more than one worker is
    allowed. Results come back in input order whatever the completion order.
    The first exception raised by a task propagates after the pool drains.
    """
    workers = max_workers or settings.MAX_WORKERS
    results: List[Optional[R]] = [None] * len(items)
    bar = tqdm(total=len(items), desc=desc, disable=not show_progress, leave=False)

    try:
        if workers <= 1 or len(items) <= 1:
            for index, item in enumerate(items):
                results[index] = func(item)
                bar.update(1)
            return results

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(func, item): index for index, item in enumerate(items)}
            for future in as_completed(futures):
                index = futures[future]
                try:
                    results[index] = future.result()
                except Exception as e:
                    logger.error(f"Task {index} ({desc or 'batch'}) failed: {e}")
                    raise
                bar.update(1)
        return results
    finally:
        bar.close()
