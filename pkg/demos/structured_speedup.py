"""Time FFT-based Toeplitz products and GP evaluations against dense algebra."""

from mobgp.bench import doubling_ratio, run_bench


def main():
    rows = run_bench(sizes=(1024, 2048, 4096), repetitions=7,
                     operations=("matvec", "solve", "gp_nll_grad"))
    for r in rows:
        print(f"{r.operation:12s} {r.structure:16s} n={r.n:5d} {r.median_ms:9.3f} ms"
              f"  speed-up {r.speedup_vs_dense:.1f}x")
    print("matvec time ratio per doubling: structured "
          f"{doubling_ratio(rows, 'matvec', 'toeplitz_fft'):.2f}, "
          f"dense {doubling_ratio(rows, 'matvec', 'dense'):.2f}")


if __name__ == "__main__":
    main()
