"""Worker-count policy: COUETTE_LAB_THREADS caps all parallelism."""

import os


def max_workers():
    cap = os.environ.get("COUETTE_LAB_THREADS")
    if cap:
        try:
            n = int(cap)
        except ValueError as exc:
            raise ValueError(f"COUETTE_LAB_THREADS must be an integer, got {cap!r}") from exc
        if n < 1:
            raise ValueError("COUETTE_LAB_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def fft_workers():
    return max_workers()
