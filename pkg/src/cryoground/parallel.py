"""Forked worker processes sharing anonymous memory maps.

Parallel assembly needs workers that (a) see the large precomputed scatter
plans without copying them and (b) write results into buffers the parent
can read.  Forked children inherit the plans through copy-on-write and the
result buffers through MAP_SHARED anonymous mmaps, so the only per-dispatch
traffic is one signal byte down and one up per worker.

Fork is required (the task closure is inherited, never pickled); on
platforms without fork callers fall back to serial execution.
"""

from __future__ import annotations

import mmap
import multiprocessing
import os
import sys
import traceback
import weakref

import numpy as np

_CMD_RUN = b"R"
_CMD_QUIT = b"Q"
_RESP_DONE = b"D"
_RESP_ERROR = b"E"


def fork_available() -> bool:
    return "fork" in multiprocessing.get_all_start_methods()


_blas_limited = False


def _limit_blas_threads():
    """Pin BLAS pools to one thread once workers exist.

    Spin-waiting BLAS threads fight the worker processes for cores; the
    vectors this package feeds BLAS are far too small to benefit from
    threading anyway.
    """
    global _blas_limited
    if _blas_limited:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=1, user_api="blas")
    except Exception:
        pass
    _blas_limited = True


class WorkerFailure(RuntimeError):
    """A worker process reported an exception or died."""


class ForkPool:
    """Persistent fork-based pool executing ``task(worker_index)`` on demand.

    dispatch() fans a run command out to every worker and blocks until all
    report completion.  Workers communicate results through shared arrays
    created with shared_array() before the pool is constructed.
    """

    @staticmethod
    def shared_array(size: int, dtype=np.float64) -> np.ndarray:
        """Array backed by an anonymous shared mmap (visible to later forks).

        The returned array keeps the map alive through its .base reference.
        A view that writes must stay within the allocated size.
        """
        nbytes = int(size) * np.dtype(dtype).itemsize
        buf = mmap.mmap(-1, max(nbytes, 1))
        return np.frombuffer(buf, dtype=dtype, count=int(size))

    def __init__(self, nworkers: int, task):
        if not fork_available():
            raise WorkerFailure("fork start method is not available on this platform")
        _limit_blas_threads()
        self._nworkers = int(nworkers)
        self._task = task
        self._procs = []
        self._cmd_w = []
        self._done_r = []
        ctx = multiprocessing.get_context("fork")
        for w in range(self._nworkers):
            cmd_r, cmd_w = os.pipe()
            done_r, done_w = os.pipe()
            proc = ctx.Process(
                target=self._worker_main, args=(w, cmd_r, done_w), daemon=True
            )
            proc.start()
            os.close(cmd_r)
            os.close(done_w)
            self._procs.append(proc)
            self._cmd_w.append(cmd_w)
            self._done_r.append(done_r)
        self._finalizer = weakref.finalize(
            self, ForkPool._cleanup, self._procs, self._cmd_w, self._done_r
        )

    def _worker_main(self, w: int, cmd_r: int, done_w: int):
        # child: drop inherited parent-side descriptors of other workers
        for fd in self._cmd_w + self._done_r:
            try:
                os.close(fd)
            except OSError:
                pass
        while True:
            cmd = os.read(cmd_r, 1)
            if cmd != _CMD_RUN:
                os._exit(0)
            try:
                self._task(w)
                os.write(done_w, _RESP_DONE)
            except BaseException:
                traceback.print_exc(file=sys.stderr)
                try:
                    os.write(done_w, _RESP_ERROR)
                except OSError:
                    os._exit(1)

    def alive(self) -> bool:
        return bool(self._procs) and all(p.is_alive() for p in self._procs)

    def dispatch(self):
        if not self._procs:
            raise WorkerFailure("pool is closed")
        for fd in self._cmd_w:
            os.write(fd, _CMD_RUN)
        for w, fd in enumerate(self._done_r):
            resp = os.read(fd, 1)
            if resp != _RESP_DONE:
                self.close()
                raise WorkerFailure(
                    f"assembly worker {w} failed (see its traceback on stderr)"
                    if resp == _RESP_ERROR
                    else f"assembly worker {w} died"
                )

    @staticmethod
    def _cleanup(procs, cmd_w, done_r):
        for fd in cmd_w:
            try:
                os.write(fd, _CMD_QUIT)
            except OSError:
                pass
        for p in procs:
            p.join(timeout=2.0)
            if p.is_alive():
                p.terminate()
                p.join(timeout=1.0)
        for fd in cmd_w + done_r:
            try:
                os.close(fd)
            except OSError:
                pass
        procs.clear()
        cmd_w.clear()
        done_r.clear()

    def close(self):
        self._finalizer()
