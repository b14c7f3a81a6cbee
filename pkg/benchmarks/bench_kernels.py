"""Compare the compiled and pure-Python kernels on the hot paths.

    python3 benchmarks/bench_kernels.py [--triples N] [--repeat R]

Reports the best of R timings for parsing, serialization, byte counting and
term interning over N synthetic triples of each regularity.
"""
import argparse
import itertools
import time

from rdfload import _accel
from rdfload.dataset import SynthProfile, synthetic_triples


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(k, data, lines, repeat: int) -> dict:
    def parse():
        for line in lines:
            k.parse_line(line)

    def serialize():
        for s, p, o in data:
            k.serialize_triple(s, p, o)

    def nbytes():
        for s, p, o in data:
            k.triple_nbytes(s, p, o)

    def intern():
        k.intern_triples(data, {}, [])

    return {name: _best(fn, repeat) for name, fn in
            (("parse", parse), ("serialize", serialize), ("nbytes", nbytes), ("intern", intern))}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--triples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = _accel.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; run: python3 setup.py build_ext --inplace")
    py = backends["python"]
    print(f"{'dataset':<10} {'op':<10}" + "".join(f"{b:>12}" for b in sorted(backends))
          + ("     speedup" if len(backends) > 1 else ""))
    for reg in ("regular", "irregular"):
        profile = SynthProfile(n_triples=args.triples, regularity=reg)
        data = list(itertools.islice(synthetic_triples(profile), args.triples))
        lines = [py.serialize_triple(*t)[:-1] for t in data]
        res = {name: bench(k, data, lines, args.repeat) for name, k in sorted(backends.items())}
        for op in res["python"]:
            row = f"{reg:<10} {op:<10}" + "".join(f"{res[b][op] * 1e3:>10.1f}ms" for b in sorted(res))
            if "cython" in res:
                row += f"{res['python'][op] / res['cython'][op]:>11.2f}x"
            print(row)


if __name__ == "__main__":
    main()
