"""Compare the compiled kernel core against the pure-numpy fallback.

Times the three replicated-share kernels on protocol-realistic shapes and
a full secure forward pass under each backend. Run:

    python benchmarks/bench_backends.py [--json out.json]
"""

import argparse
import json
import time

import numpy as np


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels():
    from trishare import backend

    rng = np.random.default_rng(0)
    results = []

    for n in (10**4, 10**5, 10**6):
        args = [rng.integers(0, 1 << 64, n, dtype=np.uint64) for _ in range(4)]
        t_np = _time(backend.numpy_impl["rep_mul"], *args)
        t_c = _time(backend.rep_mul, *args) if backend.BACKEND == "compiled" else None
        results.append({"kernel": "rep_mul", "n": n, "numpy_s": t_np, "compiled_s": t_c})

    for n in (10**4, 10**5, 10**6):
        args = [rng.integers(0, 1 << 64, n, dtype=np.uint64) for _ in range(2)]
        t_np = _time(backend.numpy_impl["rep_square"], *args)
        t_c = _time(backend.rep_square, *args) if backend.BACKEND == "compiled" else None
        results.append({"kernel": "rep_square", "n": n, "numpy_s": t_np, "compiled_s": t_c})

    for m, k, n in ((32, 32, 32), (128, 128, 128), (256, 256, 256)):
        a = [rng.integers(0, 1 << 64, (m, k), dtype=np.uint64) for _ in range(2)]
        b = [rng.integers(0, 1 << 64, (k, n), dtype=np.uint64) for _ in range(2)]
        t_np = _time(backend.numpy_impl["rep_matmul"], *a, *b)
        t_c = _time(backend.rep_matmul, *a, *b) if backend.BACKEND == "compiled" else None
        results.append({"kernel": "rep_matmul", "n": f"{m}x{k}x{n}", "numpy_s": t_np, "compiled_s": t_c})
    return results


def bench_forward(backend_name):
    import os
    import subprocess
    import sys

    # fresh interpreter so the import-time backend selection takes effect
    code = (
        "import time, numpy as np\n"
        "from trishare import transformer, run_simulated, backend\n"
        "config = transformer.ModelConfig(n_layers=2, d_model=64, n_heads=4, d_ff=256,"
        " vocab_size=100, max_seq_len=16)\n"
        "rng = np.random.default_rng(0)\n"
        "w = transformer.random_weights(config, rng)\n"
        "sw = transformer.share_weights(w, rng)\n"
        "st = transformer.share_tokens(rng.integers(0, 100, 8, dtype=np.uint64), rng)\n"
        "prog = lambda rt, t, ww: rt.open_tensor(transformer.secure_forward(rt, t, ww, config))\n"
        "run_simulated(prog, list(zip(st, sw)))\n"  # warm up
        "t0 = time.perf_counter()\n"
        "for _ in range(5): run_simulated(prog, list(zip(st, sw)))\n"
        "print((time.perf_counter() - t0) / 5, backend.BACKEND)\n"
    )
    env = dict(os.environ, TRISHARE_BACKEND=backend_name)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    seconds, active = out.stdout.split()
    assert active == backend_name, f"wanted backend {backend_name}, got {active}"
    return float(seconds)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--json", help="write results to this path")
    args = ap.parse_args()

    from trishare import backend

    report = {"active_backend": backend.BACKEND, "kernels": bench_kernels()}

    print(f"{'kernel':<12} {'size':>12} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for r in report["kernels"]:
        c = f"{r['compiled_s']:.2e}" if r["compiled_s"] else "n/a"
        sp = f"{r['numpy_s'] / r['compiled_s']:.2f}x" if r["compiled_s"] else "-"
        print(f"{r['kernel']:<12} {r['n']!s:>12} {r['numpy_s']:.2e} {c:>10} {sp:>8}")

    if backend.BACKEND == "compiled":
        t_np = bench_forward("numpy")
        t_c = bench_forward("compiled")
        report["forward_numpy_s"] = t_np
        report["forward_compiled_s"] = t_c
        print(f"\ntiny secure forward (sim): numpy {t_np:.3f}s, compiled {t_c:.3f}s ({t_np / t_c:.2f}x)")

    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
