"""Compare the compiled and numpy statevector kernels.

Run from the repository root after an editable install::

    python3 benchmarks/bench_kernels.py --qubits 8 10 12 --repeat 5

Each kernel is checked for agreement between the two backends before it is
timed. Results are printed as a table of best-of-``repeat`` wall times.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from adaptlayer.hamiltonian import hartree_fock_state
from adaptlayer.kernels import backend_module
from adaptlayer.pauli import PauliString, QubitHamiltonian
from adaptlayer.pools import build_pool


def random_hamiltonian(n: int, n_terms: int, rng: np.random.Generator) -> QubitHamiltonian:
    labels = ("".join(rng.choice(list("IXYZ"), n)) for _ in range(n_terms))
    return QubitHamiltonian(n, [(float(rng.normal()), PauliString.from_label(lab)) for lab in labels])


def workloads(n: int, n_terms: int, rng: np.random.Generator):
    """Yield ``(name, call)`` where ``call(mod)`` runs one kernel invocation on backend ``mod``."""
    pool = build_pool("qeb", n)
    elements = [pool[int(i)] for i in rng.choice(len(pool), size=min(20, len(pool)), replace=False)]
    maps = [e.pair_map for e in elements]
    h = random_hamiltonian(n, n_terms, rng)
    xm, zm, phase, coef = h._arrays
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    psi /= np.linalg.norm(psi)
    hf = hartree_fock_state(n, n // 2)

    def rotate(mod):
        state = hf.copy().reshape(-1, 1)
        for src, dst, sign in maps:
            mod.rotate_pairs(state, src, dst, sign, 0.8, 0.6)
        return state.ravel()

    def apply_generators(mod):
        return sum(np.asarray(mod.generator_apply(psi.reshape(-1, 1), *m)).ravel() for m in maps)

    yield "rotate_pairs x20", rotate
    yield "generator_apply x20", apply_generators
    yield "generator_overlap x20", lambda mod: [complex(mod.generator_overlap(psi, hf, *m)) for m in maps]
    yield f"pauli_sum_apply ({len(h)} terms)", lambda mod: np.asarray(mod.pauli_sum_apply(xm, zm, phase * coef, psi))
    yield f"pauli_expectations ({len(h)} terms)", lambda mod: np.asarray(mod.pauli_expectations(xm, zm, phase, psi))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, nargs="+", default=[8, 10, 12])
    ap.add_argument("--terms", type=int, default=200, help="Pauli terms in the random Hamiltonian")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    try:
        fast = backend_module("cython")
    except ImportError:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1
    slow = backend_module("python")

    print(f"{'qubits':>6}  {'kernel':<32}{'cython [ms]':>12}{'python [ms]':>13}{'speedup':>9}")
    for n in args.qubits:
        rng = np.random.default_rng(args.seed + n)
        for name, call in workloads(n, args.terms, rng):
            a, b = np.asarray(call(fast)), np.asarray(call(slow))
            if not np.allclose(a, b, atol=1e-10):
                raise SystemExit(f"backends disagree on {name} at n={n}")
            t_fast = min(timeit.repeat(lambda: call(fast), number=1, repeat=args.repeat))
            t_slow = min(timeit.repeat(lambda: call(slow), number=1, repeat=args.repeat))
            print(f"{n:>6}  {name:<32}{1e3 * t_fast:>12.3f}{1e3 * t_slow:>13.3f}{t_slow / t_fast:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
