"""Thread-pool scheduling tests: balanced ranges, inline fallback."""

import threading

from heartnet.parallel import MIN_PARALLEL_ITEMS, NeuronPool, _ranges


class TestRanges:
    def test_covers_all_items_in_order(self):
        for n_items in (1, 7, 64, 100, 257):
            for n_chunks in (1, 2, 3, 8):
                spans = _ranges(n_items, n_chunks)
                flat = [i for lo, hi in spans for i in range(lo, hi)]
                assert flat == list(range(n_items))

    def test_balanced(self):
        spans = _ranges(100, 8)
        sizes = [hi - lo for lo, hi in spans]
        assert max(sizes) - min(sizes) <= 1

    def test_no_empty_chunks(self):
        spans = list(_ranges(3, 8))
        assert all(hi > lo for lo, hi in spans)
        assert len(spans) == 3


class TestNeuronPool:
    def collect_threads(self, pool, n_items):
        seen = []
        lock = threading.Lock()

        def task(lo, hi):
            with lock:
                seen.append((threading.get_ident(), lo, hi))

        pool.run(n_items, task)
        return seen

    def test_small_layer_runs_inline(self):
        with NeuronPool(workers=4) as pool:
            seen = self.collect_threads(pool, MIN_PARALLEL_ITEMS - 1)
        assert len(seen) == 1
        assert seen[0][0] == threading.get_ident()

    def test_single_worker_runs_inline(self):
        with NeuronPool(workers=1) as pool:
            seen = self.collect_threads(pool, 1000)
        assert len(seen) == 1
        assert seen[0][0] == threading.get_ident()

    def test_large_layer_fans_out(self):
        with NeuronPool(workers=4) as pool:
            seen = self.collect_threads(pool, 4 * MIN_PARALLEL_ITEMS)
        assert len(seen) == 4
        covered = sorted((lo, hi) for _, lo, hi in seen)
        assert covered[0][0] == 0 and covered[-1][1] == 4 * MIN_PARALLEL_ITEMS

    def test_run_waits_for_all_chunks(self):
        # the per-layer barrier: every chunk's write lands before run returns
        out = [0] * 512
        with NeuronPool(workers=8) as pool:
            def task(lo, hi):
                for i in range(lo, hi):
                    out[i] = i + 1
            pool.run(len(out), task)
        assert out == [i + 1 for i in range(512)]

    def test_worker_count_floor(self):
        with NeuronPool(workers=1, min_items=1) as pool:
            seen = self.collect_threads(pool, 10)
        assert len(seen) == 1
