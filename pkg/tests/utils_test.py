import os
import threading
import unittest
from unittest import mock

from monad_std import Ok

from formant_da.error import DataError, UsageError
from formant_da.utils.parallel import *


class TestThreadCount(unittest.TestCase):
    def test_env(self):
        with mock.patch.dict(os.environ, {THREADS_ENV: "3"}):
            self.assertEqual(thread_count(), 3)
        with mock.patch.dict(os.environ, {THREADS_ENV: " 1 "}):
            self.assertEqual(thread_count(), 1)

    def test_default(self):
        env = {k: v for k, v in os.environ.items() if k != THREADS_ENV}
        with mock.patch.dict(os.environ, env, clear=True):
            self.assertEqual(thread_count(), os.cpu_count() or 1)

    def test_invalid(self):
        for raw in ("0", "-2", "many"):
            with mock.patch.dict(os.environ, {THREADS_ENV: raw}):
                with self.assertRaises(UsageError):
                    thread_count()


class TestOrderedMap(unittest.TestCase):
    def test_order_kept(self):
        items = list(range(50))
        for threads in (1, 4):
            out = ordered_map(lambda x: x * x, items, threads)
            self.assertEqual([r.unwrap() for r in out], [x * x for x in items])

    def test_errors_are_per_item(self):
        def reciprocal(x: int) -> float:
            if x == 0:
                raise DataError("zero")
            return 1 / x

        out = ordered_map(reciprocal, [1, 0, 2], threads=2)
        self.assertEqual(out[0], Ok(1.0))
        self.assertIsInstance(out[1].unwrap_err(), DataError)
        self.assertEqual(out[2], Ok(0.5))

    def test_uses_workers(self):
        seen = set()

        def record(x: int) -> int:
            seen.add(threading.get_ident())
            return x

        ordered_map(record, list(range(8)), threads=1)
        self.assertEqual(seen, {threading.get_ident()})

    def test_empty(self):
        self.assertEqual(ordered_map(lambda x: x, [], threads=4), [])


if __name__ == '__main__':
    unittest.main()
