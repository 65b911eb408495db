"""Acceptance suite: desk-scale synthetic reproduction plus the property suite.

Every criterion prints exactly one ``[PASS]``/``[FAIL]`` line (collected and
repeated in the pytest terminal summary). Run on its own with

    python3 -m pytest tests/test_acceptance.py -v -s
    # or
    python3 tests/test_acceptance.py

The synthetic sweep trains 55 deep models and takes several minutes on one
CPU core; it is then replayed from its manifest for the determinism check.
"""

from itertools import permutations, product
import filecmp
import time
import warnings

import numpy as np
import pytest

from crossgcca import experiment as ex
from crossgcca import trainer
from crossgcca.evaluation import ari, clustering_accuracy, kmeans, nmi
from crossgcca.linear_cca import cca_two_view, maxvar_gcca
from crossgcca.synthgen import SynthConfig, generate
from crossgcca.trainer import TrainConfig, update_shared_target
from tests.test_objectives import end_to_end_check

SEEDS = 5
RUNTIME_BUDGET_S = 20 * 60
LINES = []


def report(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance") / "sweep"
    cfg = ex.ExperimentConfig(methods=("maxvar", "dccae", "proposed"), seeds_per_cell=SEEDS, output_dir=str(out))
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        records, failures = ex.run_experiment(cfg)
    elapsed = time.perf_counter() - start
    agg = ex.aggregate(records)
    print("\n" + (out / "tables.md").read_text())
    return {"dir": out, "agg": agg, "failures": failures, "seconds": elapsed, "config": cfg}


def mean(sweep, method, lam, metric):
    return sweep["agg"][(method, lam)][metric][0]


# ---- criterion 1: synthetic reproduction

def test_c1_sweep_completes_within_budget(sweep):
    ok = not sweep["failures"] and sweep["seconds"] <= RUNTIME_BUDGET_S
    report("1.0 sweep ran (maxvar/dccae/proposed x 5 lambdas x 5 seeds)", ok,
           f"{sweep['seconds']:.0f}s (budget {RUNTIME_BUDGET_S}s), {len(sweep['failures'])} failed cells")


def test_c1_proposed_clustering(sweep):
    acc, nmi_ = mean(sweep, "proposed", 0.1, "acc"), mean(sweep, "proposed", 0.1, "nmi")
    report("1.1 proposed lambda=0.1 mean ACC >= 0.93 and NMI >= 0.85", acc >= 0.93 and nmi_ >= 0.85,
           f"ACC={acc:.4f} NMI={nmi_:.4f}")


def test_c1_maxvar_baseline(sweep):
    acc = mean(sweep, "maxvar", None, "acc")
    report("1.2 MAX-VAR ACC in [0.86, 0.97]", 0.86 <= acc <= 0.97, f"ACC={acc:.4f}")


def test_c1_robustness_at_high_lambda(sweep):
    p, d = mean(sweep, "proposed", 0.9, "acc"), mean(sweep, "dccae", 0.9, "acc")
    report("1.3 lambda=0.9: proposed ACC - DCCAE ACC >= 0.15", p - d >= 0.15,
           f"proposed={p:.4f} dccae={d:.4f} gap={p - d:.4f}")


def test_c1_proposed_classification(sweep):
    cla = mean(sweep, "proposed", 0.1, "cla_acc")
    report("1.4 proposed lambda=0.1 CLA-ACC >= 0.94", cla >= 0.94, f"CLA-ACC={cla:.4f}")


def test_c1_lambda_sensitivity(sweep):
    lams = sweep["config"].lambdas
    p = [mean(sweep, "proposed", lam, "acc") for lam in lams]
    d = [mean(sweep, "dccae", lam, "acc") for lam in lams]
    rp, rd = max(p) - min(p), max(d) - min(d)
    report("1.5 ACC range over lambda: proposed <= 0.12 and DCCAE >= 0.25", rp <= 0.12 and rd >= 0.25,
           f"proposed range={rp:.4f} ({', '.join(f'{v:.3f}' for v in p)}); "
           f"dccae range={rd:.4f} ({', '.join(f'{v:.3f}' for v in d)})")


# ---- criterion 2: property suite

def test_c2_gradient_checks():
    errs = [end_to_end_check(seed, ("proposed", "dccae", "dgcca")[seed % 3]) for seed in range(20)]
    report("2.1 20 end-to-end gradient checks, rel. error <= 1e-4", max(errs) <= 1e-4, f"max rel err={max(errs):.2e}")


def test_c2_target_constraints_every_iteration(monkeypatch):
    worst = [0.0, 0.0]
    count = [0]
    real = trainer.update_shared_target

    def spy(encodings):
        out = real(encodings)
        m, f = out.g.shape
        worst[0] = max(worst[0], np.max(np.abs(out.g.T @ out.g / m - np.eye(f))))
        worst[1] = max(worst[1], np.max(np.abs(out.g.mean(axis=0))))
        count[0] += 1
        return out

    monkeypatch.setattr(trainer, "update_shared_target", spy)
    data = generate(SynthConfig(split_sizes=(600, 300, 300)))
    for method in ("dgcca", "dccae", "proposed"):
        trainer.train(data.train.views, data.val.views, TrainConfig(method=method, lam=0.5, outer_iterations=8))
    ok = worst[0] <= 1e-8 and worst[1] <= 1e-10
    report("2.2 SharedTarget constraints after every outer iteration", ok,
           f"{count[0]} targets, max |G'G/M - I|={worst[0]:.1e}, max |col mean|={worst[1]:.1e}")


def test_c2_procrustes_optimality():
    rng = np.random.default_rng(2024)
    m, f = 50, 3
    beaten, asym, min_eig = 0, 0.0, np.inf
    for _ in range(100):
        encs = [rng.standard_normal((m, f)) * rng.uniform(0.1, 5) for _ in range(2)]
        y = np.sum(encs, axis=0)
        ybar = y - y.mean(axis=0)
        g = update_shared_target(encs).g
        a = rng.standard_normal((1000, m, f))
        a -= a.mean(axis=1, keepdims=True)
        cands = np.sqrt(m) * np.linalg.qr(a)[0]
        beaten += int(np.all(np.einsum("nmf,mf->n", cands, ybar) <= np.trace(g.T @ ybar) + 1e-9))
        gy = g.T @ ybar
        asym = max(asym, np.max(np.abs(gy - gy.T)))
        min_eig = min(min_eig, np.linalg.eigvalsh(0.5 * (gy + gy.T)).min())
    ok = beaten == 100 and asym <= 1e-8 and min_eig >= -1e-8
    report("2.3 Procrustes beats 1000 random feasible G in 100 instances; G'Y symmetric PSD", ok,
           f"{beaten}/100 instances, asym={asym:.1e}, min eig={min_eig:.3g}")


def test_c2_maxvar_cca_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        d1, d2 = rng.integers(2, 7, size=2)
        f = int(min(d1, d2))
        z = rng.standard_normal((300, f))
        x1 = z @ rng.standard_normal((f, d1)) + rng.uniform(0.2, 2) * rng.standard_normal((300, d1))
        x2 = z @ rng.standard_normal((f, d2)) + rng.uniform(0.2, 2) * rng.standard_normal((300, d2))
        a = maxvar_gcca([x1, x2], f, ridge=0.0).canonical_correlations
        b = cca_two_view(x1, x2, f, ridge=0.0).canonical_correlations
        worst = max(worst, np.max(np.abs(a - b)))
    report("2.4 K=2 MAX-VAR vs CCA canonical correlations within 1e-6 (50 instances)", worst <= 1e-6,
           f"max diff={worst:.1e}")


def test_c2_metric_oracles():
    rng = np.random.default_rng(99)
    acc_ok = True
    for k in range(1, 6):
        for _ in range(20):
            pred, truth = rng.integers(0, k, 25), rng.integers(0, k, 25)
            brute = max(np.sum(np.array(p)[pred] == truth) for p in permutations(range(k))) / 25
            acc_ok &= abs(clustering_accuracy(pred, truth, k) - brute) < 1e-15
    km_ok = True
    for _ in range(20):
        x = rng.standard_normal((8, 2)) + rng.integers(0, 2, (8, 1)) * 2.0
        best = min(sum(np.sum((x[np.array(a) == c] - x[np.array(a) == c].mean(0)) ** 2) for c in (0, 1))
                   for a in product((0, 1), repeat=8) if 0 < sum(a) < 8)
        km_ok &= abs(kmeans(x, 2, rng=rng)[1] - best) <= 1e-10 * best
    pred, truth = np.array([0, 0, 1, 1, 1, 2]), np.array([0, 0, 0, 1, 1, 1])
    # hand contingency [[2,0],[1,2],[0,1]]: MI and entropies, and pair counts for ARI
    from math import comb, log
    mi = (2 / 6) * log(2 / (6 * (2 / 6) * (3 / 6))) + (1 / 6) * log(1 / (6 * (3 / 6) * (3 / 6))) \
        + (2 / 6) * log(2 / (6 * (3 / 6) * (3 / 6))) + (1 / 6) * log(1 / (6 * (1 / 6) * (3 / 6)))
    h_p = -sum(p * log(p) for p in (2 / 6, 3 / 6, 1 / 6))
    h_t = log(2)
    exp = (comb(2, 2) + comb(3, 2)) * (2 * comb(3, 2)) / comb(6, 2)
    hand_ari = (2 - exp) / (0.5 * (4 + 6) - exp)
    hand_ok = abs(nmi(pred, truth) - mi / ((h_p + h_t) / 2)) < 1e-14 and abs(ari(pred, truth, clamp=False) - hand_ari) < 1e-14
    report("2.5 metric oracles (ACC brute force k<=5, k-means exhaustive 2^8, hand NMI/ARI)",
           acc_ok and km_ok and hand_ok, f"acc={acc_ok} kmeans={km_ok} nmi/ari={hand_ok}")


def test_c2_sweep_replay_is_byte_identical(sweep):
    replay = sweep["dir"].parent / "replay"
    import json
    cfg = ex.ExperimentConfig.from_manifest(json.loads((sweep["dir"] / "manifest.json").read_text()), replay)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ex.run_experiment(cfg)
    names = ["results.csv", "aggregate.csv", "correlation.csv", "tables.md", "manifest.json", "failures.csv"]
    same = [n for n in names if filecmp.cmp(sweep["dir"] / n, replay / n, shallow=False)]
    logs = sorted(p.name for p in (sweep["dir"] / "logs").iterdir())
    logs_same = all(_strip_seconds(sweep["dir"] / "logs" / n) == _strip_seconds(replay / "logs" / n) for n in logs)
    ok = len(same) == len(names) and logs_same
    report("2.6 full sweep rerun from manifest is byte-identical", ok,
           f"{len(same)}/{len(names)} result files identical; {len(logs)} run logs identical except timing: {logs_same}")


def _strip_seconds(path):
    return [line.rsplit(",", 1)[0] for line in path.read_text().splitlines()]


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
