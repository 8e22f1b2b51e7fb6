"""Smoke test for the rsvd_lab extension module.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/rsvd_lab-*.whl
"""

import math

import rsvd_lab as r


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    a, sigma = r.decay_matrix(40, "exponential", 0.6, seed=1)
    sv = r.singular_values(a)
    assert all(close(x, y, 1e-12) for x, y in zip(sv, sigma))

    u, s, v = r.exact_svd(a)
    assert len(u) == 40 and len(s) == 40 and len(v[0]) == 40

    approx = r.randomized_subspace_iteration(a, k=4, ell=10, q=2, seed=3)
    assert approx.k == 4 and approx.matvec_count == 6 * 10
    for j in range(4):
        assert approx.sigma[j] <= sigma[j] * (1 + 1e-12)
        assert close(approx.sigma[j], sigma[j], 1e-6)
    rec = approx.reconstruct()
    assert len(rec) == 40 and len(rec[0]) == 40

    report = r.audit(a, k=4, ell=10, q=1, seed=5)
    failed = [c["name"] for c in report["claims"] if c["status"] == "fail"]
    assert not failed, failed

    est, mv = r.randomized_power_method(a, q=8, seed=2)
    assert close(est, sigma[0], 1e-8) and mv == 18

    adv = r.adversarial_hager(100, 1e10, seed=4)
    true = max(sum(abs(row[j]) for row in adv) for j in range(100))
    assert r.hager_one_norm(adv) <= 1e-6 * true
    assert r.randomized_hager(adv, ell=5, seed=4) >= 0.1 * true

    assert r.oversampling_p(1e-16) == 16
    opt = r.optimal_ell(1, 1)
    assert close(opt["ell_opt"], math.e, 1e-9)

    dev = r.deviation_bounds(sigma, 4, 12, 4, 1, 0.1)
    assert len(dev["sv_lower"]) == 4 and dev["two_upper"] >= sigma[4]

    approx, trace = r.adaptive_rsi(a, k=3, q=1, tau=1e-8, cmax=40, seed=6)
    assert trace["status"] in ("converged", "ceiling_hit")

    small = r.improved_small_k(r.log_kernel_gaussian(60, 1.0, seed=7), 1, 5, 1, 3)
    assert small.k == 1
    print("smoke test passed")


if __name__ == "__main__":
    main()
