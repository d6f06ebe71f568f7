"""Run the finite-difference gradient suite and print one row per case."""
import time

from tamperloc.gradsuite import run_suite

start = time.perf_counter()
results = run_suite(seed=0)
for r in results:
    flag = "ok  " if r.passed else "FAIL"
    print(f"{flag} {r.name:24s} max error {r.error:.2e}  (tol {r.tol:.0e}, {r.seconds:.2f} s)")
print(f"{sum(r.passed for r in results)}/{len(results)} passed in {time.perf_counter() - start:.1f} s")
