"""
Ordered parallel map shared by split search, cross-validation and tuning.
"""

from typing import Callable, Iterable, List, Optional, TypeVar

from joblib import Parallel, delayed
from tqdm import tqdm

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(fn: Callable[[T], R], items: Iterable[T], n_jobs: int = 1,
                desc: Optional[str] = None, progress: bool = False) -> List[R]:
    """
    Apply fn to every item and return results in input order.

    Runs inline when n_jobs is 1; otherwise uses joblib's threading backend,
    which keeps result order, so reductions over the list are deterministic
    regardless of the worker count. With progress, a bar advances as results
    arrive.
    """
    items = list(items)
    if n_jobs == 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not progress)]
    results = Parallel(n_jobs=n_jobs, backend='threading', return_as='generator')(
        delayed(fn)(item) for item in items)
    return list(tqdm(results, total=len(items), desc=desc, disable=not progress))
