"""The numbered acceptance criteria, runnable from the CLI (``exitlaw check``)."""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._parallel import stream
from ..errors import NonIntegrableWarning
from ..exact import exit_law_exact, resolvent_solve, resurrected_invariant_exact
from ..process import random_generator, ssrw_generator
from ..stats import ks_test, tv_distance
from .output import emit_outputs, write_table
from .presets import preset
from .scenarios import run_scenario

CHECK_SCENARIOS = (
    "two_state", "ssrw_uniform", "finite_kill_set", "qsd_two_state", "qsd_random5",
    "mixture_path3", "ray_constant", "ray_linear",
)
RANDOM_STAGE = 10
GOLDEN_TAIL = (3 - math.sqrt(5)) / 2


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float
    limit: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] criterion {self.number:2d}: {self.title}: {self.detail} "
                f"({self.elapsed:.2f}s / limit {self.limit:g}s)")


def random_instances(seed: int, count: int = 100, max_states: int = 50):
    """Random irreducible chains with a random rate vector and initial law."""
    rng = stream(seed, RANDOM_STAGE)
    for _ in range(count):
        n = int(rng.integers(2, max_states + 1))
        Q = random_generator(n, rng, density=float(rng.uniform(0.1, 0.9)))
        kappa = rng.uniform(0.0, 2.0, n) * (rng.random(n) < 0.7)
        if not kappa.any():
            kappa[rng.integers(n)] = rng.uniform(0.1, 2.0)
        mu = rng.dirichlet(np.ones(n))
        yield Q, kappa, mu


class AcceptanceRun:
    """Runs every criterion once; scenario reports are shared between criteria."""

    def __init__(self, seed: int = 42):
        self.seed = seed
        self.reports = {}

    def report(self, name):
        if name not in self.reports:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", NonIntegrableWarning)
                rep = run_scenario(preset(name, seed=self.seed))
            rep.values["warnings_emitted"] = len(
                [w for w in caught if issubclass(w.category, NonIntegrableWarning)])
            self.reports[name] = rep
        return self.reports[name]

    # each criterion returns (passed, detail)

    def c1_resolvent_identity(self):
        worst = max(np.abs(resolvent_solve(Q, k, k) - 1.0).max()
                    for Q, k, _ in random_instances(self.seed))
        return worst < 1e-10, f"max ||R kappa - 1||_inf = {worst:.3e} over 100 chains"

    def c2_exit_law_simulated(self):
        parts, ok = [], True
        for name in ("two_state", "ssrw_uniform"):
            rep = self.report(name)
            tv = rep.get("TV(empirical exit, exact exit)")
            chi = rep.get("chi-square p (empirical exit vs exact)")
            ok &= tv.value < 0.01 and chi.value > 1e-3
            parts.append(f"{name}: TV={tv.value:.4f}, chi2 p={chi.value:.3f}")
        return ok, "; ".join(parts)

    def c3_reweighting_exact(self):
        worst = 0.0
        for Q, k, mu in random_instances(self.seed):
            pi = resurrected_invariant_exact(Q, k, mu)
            pred = k * pi / np.dot(k, pi)
            worst = max(worst, np.abs(pred - exit_law_exact(Q, k, mu)).max())
        return worst < 1e-9, f"max entrywise gap = {worst:.3e} over 100 chains"

    def c4_reweighting_simulated(self):
        parts, ok = [], True
        for name in ("two_state", "ssrw_uniform"):
            c = self.report(name).get("TV(reweighted resurrected, empirical exit)")
            ok &= c.value < 0.02
            parts.append(f"{name}: TV={c.value:.4f}")
        return ok, "; ".join(parts)

    def c5_geometric_tail(self):
        Q = ssrw_generator(-200, 200)
        mu = np.zeros(Q.n)
        mu[Q.index_of(0)] = 1.0
        pi = resurrected_invariant_exact(Q, np.ones(Q.n), mu)
        i = Q.indices_of(np.arange(5, 52))
        ratios = pi[i[1:]] / pi[i[:-1]]
        gap = np.abs(ratios - GOLDEN_TAIL).max()
        return gap < 1e-6, f"max |pi(i+1)/pi(i) - (3-sqrt5)/2| = {gap:.3e} for 5<=i<=50"

    def c6_qsd(self):
        parts, ok = [], True
        for name in ("qsd_two_state", "qsd_random5"):
            rep = self.report(name)
            names = ["QSD eigen-residual ||pi M + theta pi||", "|sum kappa pi - theta|",
                     "KS p (kill time vs Exp(theta))",
                     "max |exit law from QSD - kappa pi / theta|"]
            try:
                names.append(rep.get("independence p (kill time vs location)").name)
            except KeyError:
                pass
            checks = [rep.get(n) for n in names]
            ok &= all(c.passed for c in checks)
            parts.append(name + ": " + ", ".join(f"{c.value:.3g}" for c in checks))
        return ok, "; ".join(parts)

    def c7_mixture(self):
        c = self.report("mixture_path3").get("max |epsilon-split mixture - exit law|")
        return c.passed, f"max gap = {c.value:.3e}"

    def c8_ray(self):
        const, lin = self.report("ray_constant"), self.report("ray_linear")
        p_exp = ks_test(const.samples["inversion"].locations, lambda x: -np.expm1(-x)).p_value
        p_ray = ks_test(lin.samples["inversion"].locations,
                        lambda x: -np.expm1(-0.5 * x * x)).p_value
        p_two = [r.get("two-sample KS p (inversion vs thinning, location)").value
                 for r in (const, lin)]
        ok = p_exp > 1e-3 and p_ray > 1e-3 and min(p_two) > 1e-3
        return ok, (f"Exp(1) p={p_exp:.3f}, Rayleigh(1) p={p_ray:.3f}, "
                    f"inversion vs thinning p={p_two[0]:.3f}/{p_two[1]:.3f}")

    def c9_fixed_point(self):
        parts, ok = [], True
        for name in ("qsd_two_state", "qsd_random5"):
            rep = self.report(name)
            ex = rep.get("max |resurrected invariant from QSD - QSD|")
            sim = rep.get("TV(resurrected occupation from QSD, QSD)")
            ok &= ex.value < 1e-9 and sim.value < 0.02
            parts.append(f"{name}: exact {ex.value:.2e}, simulated TV {sim.value:.4f}")
        return ok, "; ".join(parts)

    def c10_infinite_mean(self):
        rep = self.report("finite_kill_set")
        tv = rep.get("TV(empirical exit, exact exit)").value
        warned = rep.values["warnings_emitted"] > 0
        return warned and tv < 0.015, f"warning emitted={warned}, TV={tv:.4f}"

    CRITERIA = (
        (1, "R kappa = 1 on random chains", c1_resolvent_identity, 5),
        (2, "exit law, exact vs simulated", c2_exit_law_simulated, 30),
        (3, "reweighted resurrected law = exit law (exact)", c3_reweighting_exact, 10),
        (4, "reweighted resurrected law = exit law (simulated)", c4_reweighting_simulated, 60),
        (5, "resurrected walk geometric tail", c5_geometric_tail, 5),
        (6, "quasi-stationary start", c6_qsd, 30),
        (7, "epsilon-split mixture identity", c7_mixture, 1),
        (8, "ray exit laws and sampler agreement", c8_ray, 30),
        (9, "QSD is a resurrection fixed point", c9_fixed_point, 60),
        (10, "infinite-mean guard", c10_infinite_mean, 60),
    )

    def run(self, out_dir=None) -> list:
        results = []
        start = time.perf_counter()
        for number, title, fn, limit in self.CRITERIA:
            t0 = time.perf_counter()
            passed, detail = fn(self)
            elapsed = time.perf_counter() - t0
            results.append(CriterionResult(number, title, bool(passed) and elapsed < limit,
                                           detail, elapsed, limit))
        if out_dir is not None:
            for name in CHECK_SCENARIOS:
                emit_outputs(self.report(name), out_dir)
        results.append(self._determinism(out_dir, time.perf_counter() - start))
        return results

    def _determinism(self, out_dir, elapsed_so_far):
        """Rerun every scenario with the same seed and compare tables byte for byte."""
        t0 = time.perf_counter()
        with tempfile.TemporaryDirectory() as tmp:
            first = Path(out_dir) if out_dir is not None else Path(tmp) / "first"
            second = Path(tmp) / "second"
            first.mkdir(parents=True, exist_ok=True)
            second.mkdir()
            rerun = AcceptanceRun(self.seed)
            names = [f"{n}_table.csv" for n in CHECK_SCENARIOS]
            for name in CHECK_SCENARIOS:
                if out_dir is None:
                    write_table(self.report(name), first / f"{name}_table.csv")
                write_table(rerun.report(name), second / f"{name}_table.csv")
            _, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
        elapsed = time.perf_counter() - t0
        total = elapsed_so_far + elapsed
        ok = not mismatch and not errors and total < 300
        detail = (f"{len(names) - len(mismatch) - len(errors)}/{len(names)} tables identical "
                  f"on rerun; suite total {total:.1f}s")
        return CriterionResult(11, "determinism", ok, detail, elapsed, 300)


def run_check(seed: int = 42, out_dir=None) -> list:
    return AcceptanceRun(seed).run(out_dir)
