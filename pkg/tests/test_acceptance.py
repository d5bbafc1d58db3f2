"""Acceptance suite: one pass/fail line per criterion, printed in the terminal summary.

Pinned constants come from one-time oracle runs:
  * BASELINE_VALID_FRACTION: scipy ``gaussian_kde`` (Scott bandwidth) over the
    bundled dataset, 200,000 renormalized graphs checked against the
    12-inequality brute force, gave 0.34836.
"""

import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

import conftest
from seaqugan import evaluation as ev
from seaqugan import gan_engine as ge
from seaqugan import neural_core as nc
from seaqugan.cli import main
from seaqugan.data_pipeline import EDGE_PAIRS
from seaqugan.quantum_sim import (
    AnsatzFamily,
    AnsatzSpec,
    apply_cnot,
    apply_pauli_y,
    apply_rx,
    apply_ry,
    new_statevector,
    param_shift_jacobian,
    run_generator_circuit,
)

BASELINE_VALID_FRACTION = 0.348
BASELINE_TOL = 0.02
DESK = ge.TrainConfig(epochs=200, batch_size=32, lr_disc=0.3, lr_gen=0.001, seeds=(0, 1, 2), eval_every=10)
EPOCH0_SEEDS = (0, 1, 2, 3, 4)


def record(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _train_job(args):
    name, seed, data = args
    t0 = time.perf_counter()
    res = ge.train_seed(DESK, ge.MODELS[name], data, seed)
    return name, seed, res.records, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_runs(dataset):
    jobs = [(name, s, dataset.weights) for name in ("qugan36", "classical") for s in DESK.seeds]
    workers = max(1, min(len(jobs), int(os.environ.get("QUGA_THREADS", os.cpu_count() or 1))))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_train_job, jobs))
    runs = {}
    for name, seed, records, secs in results:
        runs.setdefault(name, {})[seed] = (records, secs)
    return runs


def final_fraction(runs, name):
    return float(np.mean([recs[-1].valid_count / DESK.eval_samples for recs, _ in runs[name].values()]))


@pytest.fixture(scope="module")
def baseline_fraction(dataset):
    model = ev.kde_fit(dataset.weights)
    return ev.valid_fraction(ev.kde_sample_graphs(model, np.random.default_rng(0), 1000))


@pytest.fixture(scope="module")
def epoch0(dataset):
    out = {}
    for name in ge.MODELS:
        for s in EPOCH0_SEEDS:
            res = ge.train_seed(ge.TrainConfig(epochs=0, seeds=(s,)), ge.MODELS[name], dataset.weights, s)
            out[(name, s)] = res.records[0]
    return out


def test_criterion_1_parameter_counts():
    counts = {name: cfg.n_params for name, cfg in ge.MODELS.items()}
    counts["discriminator"] = nc.build_discriminator().n_params
    counts["classical_built"] = nc.build_classical_generator().n_params
    quantum = {f"{f.value}/L{l}": AnsatzSpec(f, l).param_count for f in AnsatzFamily for l in (5, 10)}
    ok = (
        counts == {"classical": 136, "qugan36": 36, "qugan66": 66, "qugan72": 72, "qugan132": 132,
                   "discriminator": 129, "classical_built": 136}
        and sorted(quantum.values()) == [36, 66, 72, 132]
    )
    record(1, ok, f"parameter counts {counts}")


def test_criterion_2_gradient_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)

    ps_err = 0.0
    for k in range(24):
        spec = AnsatzSpec(list(AnsatzFamily)[k % 2], 1 + k % 3, 2 + k % 5)
        params = rng.uniform(-np.pi, np.pi, spec.param_count)
        z = rng.normal(size=spec.n_qubits)
        jac = param_shift_jacobian(spec, params, z)
        h = 1e-5
        for j in range(spec.param_count):
            e = np.zeros(spec.param_count)
            e[j] = h
            fd = (run_generator_circuit(spec, params + e, z) - run_generator_circuit(spec, params - e, z)) / (2 * h)
            ps_err = max(ps_err, float(np.max(np.abs(jac[:, j] - fd))))

    mlp_rel = 0.0
    for model in (nc.build_discriminator(rng), nc.build_classical_generator(rng, output_bias=0.5)):
        model = model.with_params(model.params + 0.1 * rng.normal(size=model.n_params))
        x = rng.normal(size=(4, 6))
        out, cache = nc.forward(model, x)
        up = rng.normal(size=out.shape)
        grad = nc.backward(model, cache, up).flat()
        h = 1e-5
        for j in range(model.n_params):
            e = np.zeros(model.n_params)
            e[j] = h
            fd = np.sum(up * (nc.forward(model.with_params(model.params + e), x)[0]
                              - nc.forward(model.with_params(model.params - e), x)[0])) / (2 * h)
            if abs(fd) > 1e-6:
                mlp_rel = max(mlp_rel, abs(grad[j] - fd) / abs(fd))
            else:
                mlp_rel = max(mlp_rel, abs(grad[j] - fd))

    e2e_rel = 0.0
    for method in ge.GRAD_METHODS:
        cfg = ge.GeneratorConfig(AnsatzSpec("RxRy", 2, 3), latent_dim=3, grad_method=method)
        params = rng.uniform(-np.pi, np.pi, cfg.n_params)
        disc = nc.MlpModel((3, 4, 1), nc.init_params((3, 4, 1), rng), nc.Activation.LEAKY_RELU, nc.Activation.SIGMOID)
        z = rng.normal(size=(5, 3))

        def loss(p):
            return nc.bce_loss(nc.forward(disc, ge.generate(cfg, p, z))[0][:, 0], 1.0)[0].mean()

        d, cache = nc.forward(disc, ge.generate(cfg, params, z))
        upstream = nc.backward(disc, cache, (nc.bce_loss(d[:, 0], 1.0)[1] / len(z))[:, None]).input_grad
        grad = ge.generator_gradient(cfg, params, z, upstream)
        h = 1e-4
        fd = np.array([(loss(params + h * e) - loss(params - h * e)) / (2 * h) for e in np.eye(cfg.n_params)])
        e2e_rel = max(e2e_rel, float(np.max(np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-12))))

    secs = time.perf_counter() - t0
    ok = ps_err <= 1e-6 and mlp_rel <= 1e-4 and e2e_rel <= 1e-4 and secs < 60
    record(2, ok, f"param-shift vs FD max abs {ps_err:.2e} (24 circuits), MLP rel {mlp_rel:.2e}, "
                  f"end-to-end 3-qubit rel {e2e_rel:.2e}, {secs:.1f}s")


def test_criterion_3_simulator_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    norm_err = prob_err = 0.0
    marg_ok = True
    for trial in range(30):
        n = 1 + trial % 6
        sv = new_statevector(n)
        for _ in range(200):
            kind = int(rng.integers(4 if n > 1 else 3))
            q = int(rng.integers(n))
            if kind == 0:
                sv = apply_rx(sv, q, rng.uniform(-7, 7))
            elif kind == 1:
                sv = apply_ry(sv, q, rng.uniform(-7, 7))
            elif kind == 2:
                sv = apply_pauli_y(sv, q)
            else:
                sv = apply_cnot(sv, q, (q + 1 + int(rng.integers(n - 1))) % n)
        norm_err = max(norm_err, abs(np.linalg.norm(sv.amplitudes) - 1))
        prob_err = max(prob_err, abs(sv.probabilities().sum() - 1))
        marg = sv.marginals()
        marg_ok &= bool(np.all((marg >= 0) & (marg <= 1)))
    secs = time.perf_counter() - t0
    ok = norm_err <= 1e-10 and prob_err <= 1e-10 and marg_ok and secs < 60
    record(3, ok, f"30 random 200-gate circuits: norm err {norm_err:.1e}, prob-sum err {prob_err:.1e}, "
                  f"marginals in [0,1] {marg_ok}, {secs:.1f}s")


def _edge(w, i, j):
    return w[EDGE_PAIRS.index((min(i, j), max(i, j)))]


def _brute_force(w):
    tol = ev.TRI_EPS * np.sum(w)
    return all(
        _edge(w, a, b) <= (_edge(w, a, c) + _edge(w, c, b)) + tol
        for a, b, c in itertools.permutations(range(4), 3)
        if a < b
    )


def _relabel(w, perm):
    inv = np.argsort(perm)
    return np.array([_edge(w, inv[i], inv[j]) for i, j in EDGE_PAIRS])


def test_criterion_4_triangle_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    vecs = np.concatenate([rng.dirichlet(np.ones(6), 5000), rng.uniform(0, 0.3, (5000, 6))])
    offsets = np.array([-2e-9, -1e-9, -1e-12, 0.0, 1e-12, 1e-9, 2e-9])
    for row in vecs[5000:]:
        k = rng.permutation(ev.TRIPLE_EDGES[rng.integers(4)])
        row[k[0]] = row[k[1]] + row[k[2]] + offsets[rng.integers(len(offsets))]

    ours = ev.valid_mask(vecs)
    oracle = np.array([_brute_force(v) for v in vecs])
    agree = int((ours == oracle).sum())

    perms = list(itertools.permutations(range(4)))
    perm_ok = all(ev.valid_mask(np.array([_relabel(v, p) for p in perms])).tolist() == [bool(m)] * 24
                  for v, m in zip(vecs, ours))

    scales = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), len(vecs)))
    scale_ok = bool(np.all(ev.valid_mask(vecs * scales[:, None]) == ours))
    pow2 = 2.0 ** rng.integers(-8, 9, len(vecs))
    pow2_ok = bool(np.all(ev.valid_mask(vecs * pow2[:, None]) == ours))

    secs = time.perf_counter() - t0
    ok = agree == len(vecs) and perm_ok and scale_ok and pow2_ok and secs < 60
    record(4, ok,
           f"validator agrees with 12-inequality oracle on {agree}/{len(vecs)} vectors "
           f"({int((~oracle).sum())} invalid, 5000 boundary-adversarial); 24 relabelings {perm_ok}; "
           f"random scale in [1e-3, 1e3] {scale_ok}; power-of-two scale {pow2_ok}; {secs:.1f}s")


def test_criterion_5_baseline(baseline_fraction, desk_runs):
    finals = {name: final_fraction(desk_runs, name) for name in desk_runs}
    ok = (
        abs(baseline_fraction - BASELINE_VALID_FRACTION) <= BASELINE_TOL
        and baseline_fraction < 0.5
        and all(baseline_fraction < f for f in finals.values())
    )
    record(5, ok, f"KDE baseline {baseline_fraction:.3f} (pinned {BASELINE_VALID_FRACTION} +/- {BASELINE_TOL}), "
                  f"< 0.5 and below trained finals {finals}")


def test_criterion_6_desk_training(desk_runs, baseline_fraction):
    q = final_fraction(desk_runs, "qugan36")
    c = final_fraction(desk_runs, "classical")
    per_seed = {name: [recs[-1].valid_count for recs, _ in runs.values()] for name, runs in desk_runs.items()}
    minutes = {name: sum(s for _, s in runs.values()) / 60 for name, runs in desk_runs.items()}
    ok = q >= 0.55 and q - baseline_fraction >= 0.15 and c >= 0.50 and all(m < 30 for m in minutes.values())
    record(6, ok, f"200 epochs x 3 seeds: QuGAN(36) mean final valid {q:.3f} (baseline +{q - baseline_fraction:.3f}), "
                  f"classical {c:.3f}; per-seed counts {per_seed}; "
                  f"compute minutes {', '.join(f'{k} {v:.1f}' for k, v in minutes.items())}")


def test_criterion_7_early_variance(epoch0, dataset):
    data_std = ev.pooled_weight_std(dataset.weights)
    worst = {name: max(epoch0[(name, s)].weight_std for s in EPOCH0_SEEDS) for name in ge.MODELS}
    ok = all(v < data_std for v in worst.values())
    record(7, ok, f"epoch-0 max std per model {', '.join(f'{k} {v:.4f}' for k, v in worst.items())} "
                  f"< dataset {data_std:.4f} (seeds {list(EPOCH0_SEEDS)})")


def test_criterion_8_determinism(tmp_path):
    def run(out):
        assert main(["gen-data", "--out", str(out)]) == 0
        assert main(["train", "--out", str(out), "--model", "qugan36", "--epochs", "3",
                     "--seed-list", "0,1", "--jobs", "1"]) == 0
        files = ["dataset.csv", "runs/qugan36/metrics_seed0.csv", "runs/qugan36/metrics_seed1.csv",
                 "runs/qugan36/metrics_mean.csv"]
        return {f: (out / f).read_bytes() for f in files}

    a, b = run(tmp_path / "a"), run(tmp_path / "b")
    same = [f for f in a if a[f] == b[f]]
    record(8, len(same) == len(a), f"byte-identical across two runs: {same}")


def test_criterion_9_epoch0_validity(epoch0):
    worst = {name: min(epoch0[(name, s)].valid_count for s in EPOCH0_SEEDS) for name in ge.MODELS}
    ok = all(v >= 900 for v in worst.values())
    record(9, ok, f"epoch-0 min valid count per model (of 1000, seeds {list(EPOCH0_SEEDS)}) {worst}")
