import numpy as np
import pytest

from mobgp.bench import (COLUMNS, BenchRow, doubling_ratio, median_ms, run_bench,
                         scaling_ratios)


def test_small_bench_rows():
    rows = run_bench(sizes=(64, 128), repetitions=5, operations=("matvec", "kron_matvec", "solve"))
    assert len(COLUMNS) == 5
    assert all(len(r.as_tuple()) == 5 for r in rows)
    for op in ("matvec", "kron_matvec", "solve"):
        mine = [r for r in rows if r.operation == op]
        assert {r.structure for r in mine} >= {"dense"}
        assert {r.n for r in mine} == {64, 128}
        assert all(r.median_ms > 0 for r in mine)
    dense = [r for r in rows if r.structure == "dense"]
    assert all(r.speedup_vs_dense == 1.0 for r in dense)


def test_gp_bench_row():
    rows = run_bench(sizes=(64,), repetitions=5, operations=("gp_nll_grad",),
                     gp_bins_per_hour=(1,))
    assert {r.structure for r in rows} == {"kronecker_eigen", "dense"}
    assert all(r.n == 672 for r in rows)


def test_bench_validation():
    with pytest.raises(ValueError):
        run_bench(sizes=(32,))
    with pytest.raises(ValueError):
        run_bench(operations=("fft",))
    with pytest.raises(ValueError):
        median_ms(lambda: None, repetitions=2)


def test_ratios():
    rows = [BenchRow("matvec", "x", n, t, np.nan) for n, t in ((64, 1.0), (128, 2.0), (256, 8.0))]
    assert scaling_ratios(rows, "matvec", "x") == {128: 2.0, 256: 4.0}
    assert doubling_ratio(rows, "matvec", "x") == pytest.approx(np.sqrt(8.0))
