"""Worker-count policy for the parallel sweeps.

``MODWAVE_THREADS`` caps the number of worker threads; the compiled kernels
release the GIL so threads give real parallelism there.
"""

import os


def worker_count(jobs):
    env = os.environ.get("MODWAVE_THREADS")
    limit = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(limit, jobs))
