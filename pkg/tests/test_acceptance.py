"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The heavyweight fixtures (trained victim, attack batch, defended model) are
session-scoped and shared across criteria, so the suite runs the expensive
pipeline once. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import pointspec as ps
from oracles import exhaustive_knn_adjacency, fd_gradient, max_rel_error, path3_eigenvalues
from pointspec.attack import lfc_bound_index, lfc_loss
from pointspec.classifier import ToyClassifier
from pointspec.cli import main as cli_main
from pointspec.graph import build_knn_graph, laplacian
from pointspec.rng import stage_rng
from pointspec.spectral import eigendecompose, normalized_eigenvalues

SEED = 0
N_POINTS = 256
PER_CLASS = 100


def report(criterion: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] {criterion}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"{criterion}: {detail}"


# ---------------------------------------------------------------- fixtures


@pytest.fixture(scope="session")
def toy_setup():
    dataset = ps.gen_synthetic(per_class=PER_CLASS, n_points=N_POINTS, seed=SEED)
    model, train_report = ps.train(dataset, seed=SEED)
    clouds = dataset.points_array()
    labels = dataset.labels_array()
    correct = [i for i in train_report["holdout_indices"]
               if model.predict(clouds[i]) == labels[i]]
    return {
        "dataset": dataset,
        "clouds": clouds,
        "labels": labels,
        "model": model,
        "train_report": train_report,
        "correct_holdout": correct,
    }


@pytest.fixture(scope="session")
def attack_batch(toy_setup):
    """The criterion-8 batch: standard attack protocol on 100 holdout samples."""
    clouds, labels = toy_setup["clouds"], toy_setup["labels"]
    model = toy_setup["model"]
    tested = toy_setup["correct_holdout"][:100]
    cfg = ps.AttackConfig(mode="untargeted", epsilon=1.5, iters=500, lr=0.01,
                          k=10, poly_len=5, binary_search_steps=10)
    t0 = time.time()
    results = []
    for i in tested:
        res = ps.binary_search_beta(clouds[i], int(labels[i]), cfg, model,
                                    stop_on_success=True)
        results.append((i, res))
    return {"results": results, "elapsed": time.time() - t0, "config": cfg}


# ---------------------------------------------------------------- criteria


def test_c01_spectral_exactness():
    rng = np.random.default_rng(100)
    t0 = time.time()
    worst = {"ortho": 0.0, "parseval": 0.0, "round": 0.0, "trace": 0.0, "lam1": 0.0}
    for n in (2, 3, 64, 512):
        for _ in range(20):
            pts = ps.normalize_unit_ball(rng.normal(size=(n, 3)))
            k = min(10, n - 1)
            lap = ps.laplacian(ps.build_knn_graph(pts, k))
            eig = ps.eigendecompose(lap)
            u = eig.eigenvectors
            worst["ortho"] = max(worst["ortho"],
                                 np.abs(u.T @ u - np.eye(n)).max())
            coeffs = ps.gft(pts, eig)
            norm = np.linalg.norm(pts)
            worst["parseval"] = max(worst["parseval"],
                                    abs(np.linalg.norm(coeffs.coeffs) - norm) / norm)
            worst["round"] = max(worst["round"], np.abs(ps.igft(coeffs) - pts).max())
            tr = lap.matrix.trace()
            worst["trace"] = max(worst["trace"], abs(eig.eigenvalues.sum() - tr) / tr)
            worst["lam1"] = max(worst["lam1"], abs(eig.eigenvalues[0]))
    elapsed = time.time() - t0
    ok = (worst["ortho"] < 1e-8 and worst["parseval"] < 1e-9
          and worst["round"] < 1e-8 and worst["trace"] < 1e-6
          and worst["lam1"] < 1e-8 and elapsed < 60.0)
    report("C1 spectral exactness", ok,
           f"ortho {worst['ortho']:.1e}, parseval {worst['parseval']:.1e}, "
           f"round {worst['round']:.1e}, trace {worst['trace']:.1e}, "
           f"lam1 {worst['lam1']:.1e}, {elapsed:.1f}s")


def test_c02_tiny_graph_oracles():
    path_pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]])
    eig = eigendecompose(laplacian(build_knn_graph(path_pts, 1)))
    path_err = np.abs(eig.eigenvalues - path3_eigenvalues()).max()

    rng = np.random.default_rng(101)
    two = rng.normal(size=(2, 3))
    eig2 = eigendecompose(laplacian(build_knn_graph(two, 1)))
    coeffs = ps.gft(two, eig2).coeffs
    r = 1.0 / np.sqrt(2.0)
    gft_err = max(np.abs(coeffs[0] - r * (two[0] + two[1])).max(),
                  np.abs(coeffs[1] - r * (two[0] - two[1])).max())

    knn_ok = True
    for _ in range(50):
        n = int(rng.integers(4, 65))
        k = int(rng.integers(1, min(n, 11)))
        pts = rng.normal(size=(n, 3))
        got = ps.build_knn_graph(pts, k).adjacency
        if not np.array_equal(got, exhaustive_knn_adjacency(pts, k)):
            knn_ok = False
            break

    ok = path_err < 1e-9 and gft_err < 1e-12 and knn_ok
    report("C2 tiny-graph oracles", ok,
           f"path3 {path_err:.1e}, 2-node gft {gft_err:.1e}, knn oracle {knn_ok}")


def test_c03_polynomial_filter_fit():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        pts = rng.normal(size=(64, 3))
        eig = eigendecompose(laplacian(build_knn_graph(pts, 8)))
        idx = ps.chebyshev_anchor_indices(eig, 5)
        targets = rng.uniform(-2.0, 2.0, size=5)
        h = ps.fit_polynomial_filter(eig, idx, targets)
        lam = eig.eigenvalues[idx] / eig.lambda_max
        resid = max(abs(sum(h[p] * x ** p for p in range(5)) - t)
                    for x, t in zip(lam, targets))
        worst = max(worst, resid)
    report("C3 polynomial filter fit", worst < 1e-6, f"max residual {worst:.1e}")


def test_c04_spectral_concentration():
    b10, b40 = int(round(0.1 * 512)), int(round(0.4 * 512))
    worst10, worst40 = 1.0, 1.0
    for shape in ("sphere", "cube", "torus"):
        for trial in range(3):
            pts = ps.make_cloud(shape, 512, stage_rng(trial, f"acc4/{shape}"))
            eig = eigendecompose(laplacian(build_knn_graph(pts, 10)))
            e = ps.row_energies(ps.gft(pts, eig))
            total = e.sum()
            worst10 = min(worst10, e[:b10].sum() / total)
            worst40 = min(worst40, e[:b40].sum() / total)
    ok = worst10 >= 0.70 and worst40 >= 0.85
    report("C4 spectral concentration", ok,
           f"min low-10% share {worst10:.3f} (>=0.70), min low-40% {worst40:.3f} (>=0.85)")


def test_c05_band_removal_replication():
    ok = True
    detail = []
    for shape in ps.CLASS_NAMES:
        pts = ps.make_cloud(shape, 512, stage_rng(9, f"acc5/{shape}"))
        eig = eigendecompose(laplacian(build_knn_graph(pts, 10)))
        split = ps.default_band_split(512)
        coeffs = ps.gft(pts, eig)
        low = ps.igft(ps.apply_response(coeffs, ps.ideal_band_response(512, range(split.low_end))))
        high = ps.igft(ps.apply_response(coeffs, ps.ideal_band_response(512, range(split.mid_end, 512))))
        cl, chigh = ps.chamfer(low, pts), ps.chamfer(high, pts)
        ok = ok and cl < chigh
        detail.append(f"{shape} {cl:.4f}<{chigh:.4f}")
    report("C5 band removal replication", ok, "; ".join(detail))


def test_c06_invariance_suite():
    from pointspec.synthetic import random_rotation

    rng = np.random.default_rng(103)
    adj_ok = eig_ok = energy_ok = equiv_ok = True
    for _ in range(5):
        pts = ps.normalize_unit_ball(rng.normal(size=(128, 3)))
        rot = random_rotation(rng)
        scale = rng.uniform(0.8, 1.2)
        transformed = scale * (pts @ rot.T)

        g_base = ps.build_knn_graph(pts, 10)
        g_rot = ps.build_knn_graph(transformed, 10)
        adj_ok &= np.array_equal(g_base.adjacency, g_rot.adjacency)

        eig_base = eigendecompose(laplacian(g_base))
        eig_rot = eigendecompose(laplacian(g_rot))
        eig_ok &= np.abs(eig_base.eigenvalues - eig_rot.eigenvalues).max() <= 1e-9

        e_base = ps.row_energies(ps.gft(pts, eig_base))
        e_rot = ps.row_energies(ps.gft(pts @ rot.T, eig_rot))
        energy_ok &= np.abs(e_rot - e_base).max() <= 1e-6 * max(e_base.max(), 1.0)

        params = ps.SpectralFilterParams.identity(128, 5)
        params.delta_w += 0.2 * rng.normal(size=128)
        out_rot = ps.perturb(pts @ rot.T, eig_rot, params)
        equiv_ok &= np.abs(out_rot - ps.perturb(pts, eig_base, params) @ rot.T).max() <= 1e-8
    ok = adj_ok and eig_ok and energy_ok and equiv_ok
    report("C6 invariance suite", ok,
           f"adjacency {adj_ok}, eigenvalues {eig_ok}, energies {energy_ok}, "
           f"perturb equivariance {equiv_ok}")


def test_c07_gradient_gates():
    rng = np.random.default_rng(104)
    worst_victim = 0.0
    for trial in range(20):
        model = ToyClassifier(hidden=8, classes=6,
                              rng=np.random.default_rng(500 + trial))
        pts = rng.normal(size=(16, 3))
        label = int(rng.integers(0, 6))
        targeted = bool(trial % 2)
        _, grad = model.loss_grad_points(pts, label, targeted=targeted)
        num = fd_gradient(
            lambda x: model.loss_grad_points(x, label, targeted=targeted)[0], pts)
        worst_victim = max(worst_victim, max_rel_error(grad, num))

    worst_params = 0.0
    for trial in range(20):
        inst = np.random.default_rng(700 + trial)
        pts = ps.normalize_unit_ball(inst.normal(size=(16, 3)))
        eig = eigendecompose(laplacian(build_knn_graph(pts, 4)))
        model = ToyClassifier(hidden=8, classes=6, rng=inst)
        cfg = ps.AttackConfig(k=4, poly_len=3)
        params = ps.SpectralFilterParams.identity(16, 3)
        params.delta_w += 0.05 * inst.normal(size=16)
        params.delta_h += 0.02 * inst.normal(size=3)
        label = int(inst.integers(0, 6))

        def loss_of(p):
            return ps.adv_loss(ps.perturb(pts, eig, p), pts, label, eig, cfg, model)[0]

        _, grad_pts = ps.adv_loss(ps.perturb(pts, eig, params), pts, label, eig, cfg, model)
        gw, gh = ps.grad_params(grad_pts, pts, eig, params)
        step = 1e-6
        num_w = np.zeros(16)
        for i in range(16):
            plus, minus = params.copy(), params.copy()
            plus.delta_w[i] += step
            minus.delta_w[i] -= step
            num_w[i] = (loss_of(plus) - loss_of(minus)) / (2 * step)
        num_h = np.zeros(3)
        for l in range(3):
            plus, minus = params.copy(), params.copy()
            plus.delta_h[l] += step
            minus.delta_h[l] -= step
            num_h[l] = (loss_of(plus) - loss_of(minus)) / (2 * step)
        worst_params = max(worst_params,
                           max_rel_error(gw, num_w), max_rel_error(gh, num_h))
    ok = worst_victim < 1e-4 and worst_params < 1e-4
    report("C7 gradient gates", ok,
           f"victim {worst_victim:.1e}, params {worst_params:.1e} (<1e-4)")


def test_c08_attack_efficacy(toy_setup, attack_batch):
    holdout_acc = toy_setup["train_report"]["holdout_accuracy"]
    results = attack_batch["results"]
    successes = [res for _, res in results if res.success]
    rate = len(successes) / len(results)
    budget_ok = all(res.report.e_delta <= 1.5 + 1e-6 for res in successes)
    elapsed = attack_batch["elapsed"]
    ok = (holdout_acc >= 0.90 and len(results) == 100 and rate >= 0.90
          and budget_ok and elapsed < 600.0)
    report("C8 attack efficacy", ok,
           f"holdout acc {holdout_acc:.3f}, success {len(successes)}/{len(results)}, "
           f"budget ok {budget_ok}, {elapsed:.0f}s")


def test_c09_lfc_ablation(toy_setup):
    clouds, labels = toy_setup["clouds"], toy_setup["labels"]
    model = toy_setup["model"]
    cfg_on = ps.AttackConfig(mode="untargeted", epsilon=1.5, iters=500, lr=0.01,
                             k=10, poly_len=5, beta2=1.0)
    cfg_off = replace(cfg_on, beta2=0.0)
    b = lfc_bound_index(N_POINTS, cfg_on.lfc_fraction)
    pairs = []
    for i in toy_setup["correct_holdout"]:
        pts, y = clouds[i], int(labels[i])
        eig = eigendecompose(laplacian(build_knn_graph(pts, 10)))
        r_on = ps.run_attack(pts, y, cfg_on, model, eig=eig)
        r_off = ps.run_attack(pts, y, cfg_off, model, eig=eig)
        if r_on.success and r_off.success:
            pairs.append((lfc_loss(r_on.adversarial, pts, eig, b),
                          lfc_loss(r_off.adversarial, pts, eig, b),
                          r_on.report.d_norm, r_off.report.d_norm))
        if len(pairs) >= 20:
            break
    arr = np.array(pairs)
    enough = len(pairs) >= 20
    lfc_lower = enough and arr[:, 0].mean() < arr[:, 1].mean()
    dnorm_lower = enough and arr[:, 2].mean() < arr[:, 3].mean()
    ok = enough and lfc_lower and dnorm_lower
    detail = (f"{len(pairs)} paired successes, "
              f"lfc {arr[:, 0].mean():.4f} vs {arr[:, 1].mean():.4f}, "
              f"d_norm {arr[:, 2].mean():.4f} vs {arr[:, 3].mean():.4f}"
              if enough else f"only {len(pairs)} paired successes")
    report("C9 LFC ablation", ok, detail)


def test_c10_defense_efficacy(toy_setup, attack_batch):
    clouds, labels = toy_setup["clouds"], toy_setup["labels"]
    model = toy_setup["model"]
    records = [(res.adversarial, int(labels[i]))
               for i, res in attack_batch["results"] if res.success]
    baseline = 1.0  # every record fooled the undefended victim by construction

    defended, defended_report = ps.train_with_lowpass_augmentation(
        toy_setup["dataset"], seed=SEED)
    cfg = ps.DefenseConfig(kind="lowpass_retrain", k=10)
    rate = ps.evaluate_under_defense(records, cfg, model, defended_model=defended)

    drop = baseline - rate
    clean_gap = toy_setup["train_report"]["holdout_accuracy"] - defended_report["holdout_accuracy"]
    ok = drop >= 0.20 and clean_gap <= 0.03
    report("C10 defense efficacy", ok,
           f"transfer success {rate:.3f} (drop {100 * drop:.0f} pts >= 20), "
           f"clean gap {100 * clean_gap:.1f} pts <= 3")


def test_c11_budget_identity_invariants(toy_setup):
    clouds, labels = toy_setup["clouds"], toy_setup["labels"]
    model = toy_setup["model"]
    rng = np.random.default_rng(105)
    pts = ps.normalize_unit_ball(rng.normal(size=(64, 3)))
    eig = eigendecompose(laplacian(build_knn_graph(pts, 10)))

    params = ps.SpectralFilterParams.identity(64, 5)
    identity_ok = np.abs(ps.perturb(pts, eig, params) - pts).max() < 1e-8

    params.delta_w += rng.normal(size=64)
    eps = 0.3
    once = ps.project_epsilon(params, pts, eig, eps)
    twice = ps.project_epsilon(once, pts, eig, eps)
    idem_ok = twice is once

    g = once.response(normalized_eigenvalues(eig))
    c_hat = eig.eigenvectors.T @ pts
    budget_ok = np.linalg.norm((g - 1.0)[:, None] * c_hat) <= eps + 1e-9

    # logged run: every post-projection iterate within budget
    i = toy_setup["correct_holdout"][0]
    cfg = ps.AttackConfig(iters=150, epsilon=0.5, k=10, poly_len=5)
    res = ps.run_attack(clouds[i], int(labels[i]), cfg, model)
    trace_ok = (res.trace[1:, 1] <= cfg.epsilon + 1e-9).all()

    ok = identity_ok and idem_ok and budget_ok and trace_ok
    report("C11 budget and identity invariants", ok,
           f"identity {identity_ok}, idempotent {idem_ok}, "
           f"projection {budget_ok}, trace {trace_ok}")


def _run_demo_pipeline(root: Path, seed: int):
    data, model_dir, attacked, defended = (root / "data", root / "model",
                                           root / "attacked", root / "defended")
    assert cli_main(["gen-data", "--out", str(data), "--per-class", "4",
                     "--points", "64", "--seed", str(seed)]) == 0
    assert cli_main(["train", "--data", str(data), "--out", str(model_dir),
                     "--epochs", "2", "--seed", str(seed)]) == 0
    assert cli_main(["attack", "--data", str(data),
                     "--model", str(model_dir / "model.json"),
                     "--out", str(attacked), "--iters", "80", "--k", "6",
                     "--samples", "4", "--trace", "--seed", str(seed)]) == 0
    assert cli_main(["defend", "--attacked", str(attacked),
                     "--model", str(model_dir / "model.json"),
                     "--kind", "gaussian", "--params", "0.01,0.02",
                     "--out", str(defended), "--seed", str(seed)]) == 0
    assert cli_main(["eval", "--pairs", str(attacked), "--k", "6",
                     "--out", str(root / "eval.csv")]) == 0
    assert cli_main(["spectrum", "--in", str(data / "cloud_0000.xyz"),
                     "--k", "6", "--out", str(root / "spec.csv")]) == 0


def _normalized_tree(root: Path, placeholder_for: Path):
    """File contents with the run directory path masked out of manifests."""
    out = {}
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        text = path.read_text()
        out[str(path.relative_to(root))] = text.replace(str(placeholder_for), "[RUN]")
    return out


def test_c12_pipeline_determinism(tmp_path):
    run_a, run_b = tmp_path / "a", tmp_path / "b"
    _run_demo_pipeline(run_a, seed=3)
    _run_demo_pipeline(run_b, seed=3)
    tree_a = _normalized_tree(run_a, run_a)
    tree_b = _normalized_tree(run_b, run_b)
    same_files = sorted(tree_a) == sorted(tree_b)
    diffs = [name for name in tree_a if same_files and tree_a[name] != tree_b[name]]
    ok = same_files and not diffs
    report("C12 pipeline determinism", ok,
           "identical trees" if ok else f"differs: {diffs[:5]}")
