import logging
import multiprocessing
from typing import Callable, List, Optional, Sequence, TypeVar

from tqdm import tqdm

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

Item = TypeVar("Item")
Result = TypeVar("Result")


def map_ordered(
    func: Callable[[Item], Result],
    items: Sequence[Item],
    processes: Optional[int] = 1,
    desc: Optional[str] = None,
    progress: bool = False,
) -> List[Result]:
    """
    Evaluate ``func`` over ``items`` and return the results in input order.

    With more than one process the work is spread over a multiprocessing pool;
    ``imap`` keeps results in submission order regardless of completion order,
    so outputs do not depend on the number of workers.

    Args:
        func (Callable): Picklable function of one item.
        items (Sequence): Work items.
        processes (Optional[int]): Number of worker processes. None uses the number
            of CPU cores; 1 evaluates inline. Defaults to 1.
        desc (Optional[str]): Label of the progress bar.
        progress (bool): Show a tqdm progress bar.

    Returns:
        List: ``[func(item) for item in items]``.
    """
    if processes is None:
        processes = multiprocessing.cpu_count()
    items = list(items)
    if processes <= 1 or len(items) < 2:
        return [func(item) for item in tqdm(items, desc=desc, disable=not progress)]

    logger.info(f"Dispatching {len(items)} items to {processes} processes")
    with multiprocessing.Pool(processes=processes) as pool:
        return list(
            tqdm(
                pool.imap(func, items),
                total=len(items),
                desc=desc,
                disable=not progress,
            )
        )
